use rand::Rng;
use rand_distr::StandardNormal;

use crate::em::SampleSet;
use crate::error::{Error, Result};
use crate::seed::{self, SeedRole};

/// Equal-weight empirical measure on `R^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalMeasure {
    dim: usize,
    points: Vec<f64>,
}

impl EmpiricalMeasure {
    /// `points` is row-major with `dim` columns.
    pub fn new(dim: usize, points: Vec<f64>) -> Result<Self> {
        if dim == 0 || points.is_empty() || !points.len().is_multiple_of(dim) {
            return Err(Error::EmptyInput("empirical measure needs at least one point".into()));
        }
        Ok(Self { dim, points })
    }

    pub fn from_samples(set: &SampleSet) -> Result<Self> {
        Self::new(set.dim, set.points.clone())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.points.chunks_exact(self.dim)
    }

    /// `(1/N) sum_i h(x_i)`.
    pub fn integrate(&self, h: impl Fn(&[f64]) -> f64) -> f64 {
        self.rows().map(h).sum::<f64>() / self.len() as f64
    }

    pub fn project(&self, u: &[f64]) -> Vec<f64> {
        self.rows().map(|x| x.iter().zip(u).map(|(a, b)| a * b).sum()).collect()
    }
}

fn sorted(a: &[f64]) -> Vec<f64> {
    let mut v = a.to_vec();
    v.sort_by(|x, y| x.total_cmp(y));
    v
}

/// W1 between two equal-weight samples on the line: the `L^1` distance of
/// their quantile functions. Unequal sizes are handled exactly by merging
/// the quantile breakpoints.
pub fn w1_1d(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyInput("w1_1d needs two nonempty samples".into()));
    }
    let a = sorted(a);
    let b = sorted(b);
    if a.len() == b.len() {
        let s: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum();
        return Ok(s / a.len() as f64);
    }
    // Breakpoints (i+1)/n and (j+1)/m, scaled by n*m to stay integral.
    let (n, m) = (a.len() as u128, b.len() as u128);
    let (mut i, mut j) = (0usize, 0usize);
    let mut cur: u128 = 0;
    let mut acc = 0.0;
    while i < a.len() && j < b.len() {
        let next_a = (i as u128 + 1) * m;
        let next_b = (j as u128 + 1) * n;
        let next = next_a.min(next_b);
        acc += (a[i] - b[j]).abs() * (next - cur) as f64;
        cur = next;
        if next_a == next {
            i += 1;
        }
        if next_b == next {
            j += 1;
        }
    }
    Ok(acc / (n * m) as f64)
}

/// W1 between a sample and a continuous law given by its quantile function,
/// pairing order statistic `i` with the quantile at `(i - 1/2)/N`.
pub fn w1_to_quantiles(samples: &[f64], quantile: impl Fn(f64) -> f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptyInput("w1_to_quantiles needs samples".into()));
    }
    let s = sorted(samples);
    let n = s.len() as f64;
    let total: f64 = s
        .iter()
        .enumerate()
        .map(|(i, x)| (x - quantile((i as f64 + 0.5) / n)).abs())
        .sum();
    Ok(total / n)
}

/// Projection directions: `e/|e|`, the coordinate axes, then random unit
/// vectors from the direction stream of `seed` until `n_directions` is
/// reached. In one dimension the single direction `+1` is returned.
pub fn sliced_directions(dim: usize, n_directions: usize, seed_value: u64) -> Vec<Vec<f64>> {
    if dim == 1 {
        return vec![vec![1.0]];
    }
    let mut dirs = vec![vec![1.0 / (dim as f64).sqrt(); dim]];
    for i in 0..dim {
        let mut u = vec![0.0; dim];
        u[i] = 1.0;
        dirs.push(u);
    }
    let mut rng = seed::rng_for(seed_value, SeedRole::Direction, 0);
    while dirs.len() < n_directions {
        let g: Vec<f64> = (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 1e-12 {
            dirs.push(g.into_iter().map(|v| v / norm).collect());
        }
    }
    dirs
}

/// Sliced W1: mean of the one-dimensional W1 over the projection directions.
pub fn w1_sliced(a: &EmpiricalMeasure, b: &EmpiricalMeasure, n_directions: usize, seed_value: u64) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch(format!("dimensions {} and {}", a.dim(), b.dim())));
    }
    let dirs = sliced_directions(a.dim(), n_directions, seed_value);
    let mut total = 0.0;
    for u in &dirs {
        total += w1_1d(&a.project(u), &b.project(u))?;
    }
    Ok(total / dirs.len() as f64)
}
