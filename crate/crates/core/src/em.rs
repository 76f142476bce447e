//! Euler-Maruyama chain `X_{k+1} = X_k + g(X_k) eta + sqrt(eta) sigma xi_{k+1}`.
//!
//! Each step consumes `d` standard-normal draws in coordinate order from a
//! [`SimRng`] seeded by [`derive_seed`](crate::seed::derive_seed) with the
//! chain role. Chains are independent and merged by chain id.

use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::DiffusionModel;
use crate::seed::{self, SeedRole, SimRng};

/// States whose norm exceeds this abort the chain.
pub const OVERFLOW_NORM: f64 = 1e8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmConfig {
    pub eta: f64,
    pub n_steps: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub x0: Vec<f64>,
    pub seed: u64,
    pub n_chains: usize,
}

impl EmConfig {
    pub fn validate(&self, dim: usize) -> Result<()> {
        let max_eta = (-1.0f64).exp();
        if !(self.eta > 0.0 && self.eta < max_eta) {
            return Err(Error::InvalidParameter(format!("eta must lie in (0, 1/e), got {}", self.eta)));
        }
        if self.n_steps > 0 && self.burn_in >= self.n_steps {
            return Err(Error::InvalidParameter(format!(
                "burn_in ({}) must be below n_steps ({})",
                self.burn_in, self.n_steps
            )));
        }
        if self.thin == 0 {
            return Err(Error::InvalidParameter("thin must be at least 1".into()));
        }
        if self.n_chains == 0 {
            return Err(Error::InvalidParameter("n_chains must be at least 1".into()));
        }
        if self.x0.len() != dim {
            return Err(Error::DimensionMismatch(format!("x0 has length {}, model has {dim}", self.x0.len())));
        }
        if self.x0.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("x0 must be finite".into()));
        }
        Ok(())
    }

    /// Number of states a chain keeps.
    pub fn n_kept(&self) -> usize {
        if self.n_steps == 0 {
            0
        } else {
            (self.n_steps - self.burn_in) / self.thin
        }
    }
}

/// Kept states of one chain. Row `j` is the state after
/// `first_step + j * stride` steps.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub dim: usize,
    pub states: Vec<f64>,
    pub eta: f64,
    pub x0: Vec<f64>,
    pub seed: u64,
    pub chain_id: u64,
    pub first_step: u64,
    pub stride: u64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.states.len().checked_div(self.dim).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.states[j * self.dim..(j + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.states.chunks_exact(self.dim.max(1))
    }

    pub fn step_index(&self, j: usize) -> u64 {
        self.first_step + j as u64 * self.stride
    }

    pub fn time(&self, j: usize) -> f64 {
        self.step_index(j) as f64 * self.eta
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub eta: f64,
    pub burn_in: u64,
    pub thin: u64,
    pub seeds: Vec<u64>,
    pub generator: String,
}

/// Pooled points (row-major) with per-row chain id and step index.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    pub dim: usize,
    pub points: Vec<f64>,
    pub chain_ids: Vec<u64>,
    pub step_indices: Vec<u64>,
    pub provenance: Provenance,
}

impl SampleSet {
    pub fn len(&self) -> usize {
        self.chain_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chain_ids.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.points.chunks_exact(self.dim.max(1))
    }

    /// Projection of every point on `u`.
    pub fn project(&self, u: &[f64]) -> Vec<f64> {
        self.rows().map(|x| x.iter().zip(u).map(|(a, b)| a * b).sum()).collect()
    }

    /// Column `i` (0-based).
    pub fn coordinate(&self, i: usize) -> Vec<f64> {
        self.rows().map(|x| x[i]).collect()
    }

    pub fn from_trajectories(trajs: &[Trajectory], provenance: Provenance) -> Self {
        let dim = trajs.first().map_or(0, |t| t.dim);
        let mut out = SampleSet {
            dim,
            points: Vec::new(),
            chain_ids: Vec::new(),
            step_indices: Vec::new(),
            provenance,
        };
        for t in trajs {
            out.points.extend_from_slice(&t.states);
            for j in 0..t.len() {
                out.chain_ids.push(t.chain_id);
                out.step_indices.push(t.step_index(j));
            }
        }
        out
    }

    /// Builds a set from raw rows, e.g. scaled queue samples.
    pub fn from_rows(dim: usize, points: Vec<f64>, provenance: Provenance) -> Self {
        let n = points.len().checked_div(dim).unwrap_or(0);
        SampleSet {
            dim,
            points,
            chain_ids: vec![0; n],
            step_indices: (0..n as u64).collect(),
            provenance,
        }
    }
}

/// One step from `x` with the given standard-normal draw.
pub fn em_step(model: &DiffusionModel, x: &[f64], eta: f64, xi: &[f64]) -> Result<Vec<f64>> {
    model.check_dim(x.len())?;
    model.check_dim(xi.len())?;
    let mut next = vec![0.0; x.len()];
    step_into(model, x, eta, eta.sqrt(), xi, &mut next);
    if !state_ok(&next) {
        return Err(Error::NonFinite { step: 1 });
    }
    Ok(next)
}

#[inline]
fn step_into(model: &DiffusionModel, x: &[f64], eta: f64, sqrt_eta: f64, xi: &[f64], out: &mut [f64]) {
    model.drift_into(x, out);
    for (o, xv) in out.iter_mut().zip(x) {
        *o = xv + *o * eta;
    }
    model.add_noise(xi, sqrt_eta, out);
}

#[inline]
fn state_ok(x: &[f64]) -> bool {
    let n2: f64 = x.iter().map(|v| v * v).sum();
    n2.is_finite() && n2 <= OVERFLOW_NORM * OVERFLOW_NORM
}

/// Reusable stepping state for hot loops.
pub struct Stepper<'a> {
    model: &'a DiffusionModel,
    eta: f64,
    sqrt_eta: f64,
    x: Vec<f64>,
    buf: Vec<f64>,
    xi: Vec<f64>,
    steps: usize,
}

impl<'a> Stepper<'a> {
    pub fn new(model: &'a DiffusionModel, eta: f64, x0: &[f64]) -> Self {
        let d = model.dim();
        Self {
            model,
            eta,
            sqrt_eta: eta.sqrt(),
            x: x0.to_vec(),
            buf: vec![0.0; d],
            xi: vec![0.0; d],
            steps: 0,
        }
    }

    pub fn state(&self) -> &[f64] {
        &self.x
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Draws `d` normals in coordinate order and advances one step.
    #[inline]
    pub fn step(&mut self, rng: &mut SimRng) -> Result<&[f64]> {
        for v in self.xi.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        self.advance_with(None)
    }

    /// Advances one step with a caller-supplied draw.
    #[inline]
    pub fn step_with(&mut self, xi: &[f64]) -> Result<&[f64]> {
        self.advance_with(Some(xi))
    }

    #[inline]
    fn advance_with(&mut self, xi: Option<&[f64]>) -> Result<&[f64]> {
        let xi = xi.unwrap_or(&self.xi);
        step_into(self.model, &self.x, self.eta, self.sqrt_eta, xi, &mut self.buf);
        std::mem::swap(&mut self.x, &mut self.buf);
        self.steps += 1;
        if !state_ok(&self.x) {
            return Err(Error::NonFinite { step: self.steps });
        }
        Ok(&self.x)
    }

    /// Advances `n` steps.
    pub fn run(&mut self, n: usize, rng: &mut SimRng) -> Result<()> {
        for _ in 0..n {
            self.step(rng)?;
        }
        Ok(())
    }
}

/// Chain 0 of `config`.
pub fn simulate_chain(model: &DiffusionModel, config: &EmConfig) -> Result<Trajectory> {
    simulate_chain_id(model, config, 0)
}

pub fn simulate_chain_id(model: &DiffusionModel, config: &EmConfig, chain_id: u64) -> Result<Trajectory> {
    config.validate(model.dim())?;
    let seed = seed::derive_seed(config.seed, SeedRole::Chain, chain_id);
    let mut rng = <SimRng as rand::SeedableRng>::seed_from_u64(seed);
    let d = model.dim();
    let mut states = Vec::with_capacity(config.n_kept() * d);
    let mut stepper = Stepper::new(model, config.eta, &config.x0);
    if config.n_steps > 0 {
        stepper.run(config.burn_in, &mut rng)?;
        for _ in 0..config.n_kept() {
            stepper.run(config.thin - 1, &mut rng)?;
            states.extend_from_slice(stepper.step(&mut rng)?);
        }
    }
    Ok(Trajectory {
        dim: d,
        states,
        eta: config.eta,
        x0: config.x0.clone(),
        seed,
        chain_id,
        first_step: (config.burn_in + config.thin) as u64,
        stride: config.thin as u64,
    })
}

/// All `n_chains` chains, in parallel, ordered by chain id.
pub fn simulate_chains(model: &DiffusionModel, config: &EmConfig) -> Result<Vec<Trajectory>> {
    config.validate(model.dim())?;
    (0..config.n_chains as u64)
        .into_par_iter()
        .map(|id| simulate_chain_id(model, config, id))
        .collect()
}

/// `eta = delta^2`, `N = ceil(k * delta^-2 * ln(1/delta))`, at least one step.
/// `k` stands in for the unknown constant of the convergence bound.
pub fn plan_steps(delta: f64, k: f64) -> Result<(f64, usize)> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::BadDelta(delta));
    }
    if !(k > 0.0 && k.is_finite()) {
        return Err(Error::InvalidParameter(format!("planner constant must be positive, got {k}")));
    }
    let eta = delta * delta;
    let n = (k * (1.0 / delta).ln() / eta).ceil().max(1.0);
    Ok((eta, n as usize))
}

/// Settings for invariant-measure sampling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub eta: f64,
    pub n_samples: usize,
    /// Steps between kept samples; defaults to `ceil(1/eta)`.
    #[serde(default)]
    pub gap: Option<usize>,
    pub burn_in: usize,
    pub seed: u64,
    #[serde(default = "one")]
    pub n_chains: usize,
    /// Start state; the origin when absent.
    #[serde(default)]
    pub x0: Option<Vec<f64>>,
}

fn one() -> usize {
    1
}

pub fn default_gap(eta: f64) -> usize {
    (1.0 / eta).ceil().max(1.0) as usize
}

impl SamplerConfig {
    pub fn new(eta: f64, n_samples: usize, burn_in: usize, seed: u64) -> Self {
        Self {
            eta,
            n_samples,
            gap: None,
            burn_in,
            seed,
            n_chains: 1,
            x0: None,
        }
    }

    pub fn gap(&self) -> usize {
        self.gap.unwrap_or_else(|| default_gap(self.eta))
    }

    /// Number of samples drawn by chain `i`.
    pub fn chain_share(&self, i: usize) -> usize {
        let base = self.n_samples / self.n_chains;
        base + usize::from(i < self.n_samples % self.n_chains)
    }

    /// Per-chain configuration for chain `i`.
    pub fn em_config(&self, dim: usize, i: usize) -> EmConfig {
        let gap = self.gap();
        EmConfig {
            eta: self.eta,
            n_steps: self.burn_in + self.chain_share(i) * gap,
            burn_in: self.burn_in,
            thin: gap,
            x0: self.x0.clone().unwrap_or_else(|| vec![0.0; dim]),
            seed: self.seed,
            n_chains: self.n_chains,
        }
    }
}

/// Samples of the EM invariant measure pooled across chains.
pub fn sample_invariant(model: &DiffusionModel, config: &SamplerConfig) -> Result<SampleSet> {
    if config.n_samples == 0 {
        return Err(Error::InvalidParameter("n_samples must be at least 1".into()));
    }
    if config.n_chains == 0 || config.n_chains > config.n_samples {
        return Err(Error::InvalidParameter("n_chains must lie in 1..=n_samples".into()));
    }
    let d = model.dim();
    let trajs: Vec<Trajectory> = (0..config.n_chains)
        .into_par_iter()
        .map(|i| simulate_chain_id(model, &config.em_config(d, i), i as u64))
        .collect::<Result<_>>()?;
    let provenance = Provenance {
        eta: config.eta,
        burn_in: config.burn_in as u64,
        thin: config.gap() as u64,
        seeds: trajs.iter().map(|t| t.seed).collect(),
        generator: seed::GENERATOR.to_string(),
    };
    Ok(SampleSet::from_trajectories(&trajs, provenance))
}

/// Density of the one-step law `N(x + eta g(x), eta sigma sigma')` at `z`.
pub fn transition_density(model: &DiffusionModel, eta: f64, x: &[f64], z: &[f64]) -> Result<f64> {
    if !(eta > 0.0) {
        return Err(Error::InvalidParameter(format!("eta must be positive, got {eta}")));
    }
    model.check_dim(x.len())?;
    model.check_dim(z.len())?;
    let d = model.dim();
    let g = model.drift(x);
    let resid = DVector::from_iterator(d, (0..d).map(|i| z[i] - x[i] - eta * g[i]));
    let l = model.sigma();
    let w = l
        .solve_lower_triangular(&resid)
        .ok_or(Error::NotPositiveDefinite { min_eigenvalue: 0.0 })?;
    let quad = w.norm_squared() / eta;
    let log_det: f64 = (0..d).map(|i| 2.0 * l[(i, i)].ln()).sum::<f64>() + d as f64 * eta.ln();
    let log_norm = 0.5 * (d as f64 * (2.0 * std::f64::consts::PI).ln() + log_det);
    Ok((-0.5 * quad - log_norm).exp())
}

/// Empirical `E|X|^ell` with its naive standard error.
pub fn moment_estimate(samples: &SampleSet, ell: f64) -> Result<(f64, f64)> {
    if samples.is_empty() {
        return Err(Error::EmptyInput("sample set".into()));
    }
    if !(ell >= 1.0) {
        return Err(Error::InvalidParameter(format!("moment order must be >= 1, got {ell}")));
    }
    let vals: Vec<f64> = samples
        .rows()
        .map(|x| x.iter().map(|v| v * v).sum::<f64>().sqrt().powf(ell))
        .collect();
    Ok(mean_and_stderr(&vals))
}

pub(crate) fn mean_and_stderr(vals: &[f64]) -> (f64, f64) {
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    if vals.len() < 2 {
        return (mean, 0.0);
    }
    let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Mean squared gap between one EM step of size `eta` and `substeps` finer
/// EM steps driven by the same Brownian increments, over `n_pairs` draws
/// from the fixed start `x`.
pub fn coupling_gap(
    model: &DiffusionModel,
    x: &[f64],
    eta: f64,
    substeps: usize,
    n_pairs: usize,
    seed: u64,
) -> Result<f64> {
    model.check_dim(x.len())?;
    if substeps == 0 || n_pairs == 0 {
        return Err(Error::InvalidParameter("substeps and n_pairs must be positive".into()));
    }
    let d = model.dim();
    let h = eta / substeps as f64;
    let gaps: Vec<f64> = (0..n_pairs as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = seed::rng_for(seed, SeedRole::Replication, i);
            let mut fine = Stepper::new(model, h, x);
            let mut total = vec![0.0; d];
            let mut xi = vec![0.0; d];
            for _ in 0..substeps {
                for v in xi.iter_mut() {
                    *v = rng.sample(StandardNormal);
                }
                fine.step_with(&xi)?;
                for (t, v) in total.iter_mut().zip(&xi) {
                    *t += v;
                }
            }
            // Sum of sub-increments over sqrt(substeps) is the coarse draw.
            let scale = 1.0 / (substeps as f64).sqrt();
            total.iter_mut().for_each(|t| *t *= scale);
            let coarse = em_step(model, x, eta, &total)?;
            Ok(coarse.iter().zip(fine.state()).map(|(a, b)| (a - b).powi(2)).sum::<f64>())
        })
        .collect::<Result<_>>()?;
    Ok(gaps.iter().sum::<f64>() / n_pairs as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelSpec;
    use approx::assert_abs_diff_eq;

    fn scalar(alpha: f64, beta: f64) -> DiffusionModel {
        ModelSpec::exponential(alpha, beta).build().unwrap()
    }

    #[test]
    fn step_examples() {
        let m = scalar(0.5, 1.0);
        let x = em_step(&m, &[0.0], 0.01, &[0.0]).unwrap();
        assert_abs_diff_eq!(x[0], -0.01, epsilon = 1e-15);
        let x = em_step(&m, &[0.0], 0.01, &[1.0]).unwrap();
        assert_abs_diff_eq!(x[0], 0.131421, epsilon = 1e-6);
        let x = em_step(&m, &[0.7], 0.0, &[0.0]).unwrap();
        assert_eq!(x, vec![0.7]);

        let e2 = ModelSpec::erlang2(0.5, 1.0).build().unwrap();
        let x = em_step(&e2, &[1.0, 1.0], 0.1, &[0.0, 0.0]).unwrap();
        assert_abs_diff_eq!(x[0], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(x[1], 0.6, epsilon = 1e-14);
    }

    #[test]
    fn overflow_is_reported() {
        let m = scalar(0.5, 1.0);
        assert!(matches!(em_step(&m, &[1e9], 0.01, &[0.0]), Err(Error::NonFinite { .. })));
    }

    #[test]
    fn empty_and_deterministic_chain() {
        let m = scalar(1.0, 1.0);
        let mut cfg = EmConfig {
            eta: 0.01,
            n_steps: 0,
            burn_in: 0,
            thin: 1,
            x0: vec![0.0],
            seed: 9,
            n_chains: 1,
        };
        assert!(simulate_chain(&m, &cfg).unwrap().is_empty());
        cfg.n_steps = 1000;
        cfg.burn_in = 100;
        cfg.thin = 7;
        let a = simulate_chain(&m, &cfg).unwrap();
        let b = simulate_chain(&m, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), (1000 - 100) / 7);
        assert_eq!(a.step_index(0), 107);
    }

    #[test]
    fn config_validation() {
        let m = scalar(1.0, 1.0);
        let base = EmConfig {
            eta: 0.5,
            n_steps: 10,
            burn_in: 0,
            thin: 1,
            x0: vec![0.0],
            seed: 0,
            n_chains: 1,
        };
        assert!(simulate_chain(&m, &base).is_err());
        let c = EmConfig { eta: 0.1, thin: 0, ..base.clone() };
        assert!(simulate_chain(&m, &c).is_err());
        let c = EmConfig { eta: 0.1, burn_in: 10, ..base.clone() };
        assert!(simulate_chain(&m, &c).is_err());
        let c = EmConfig { eta: 0.1, x0: vec![0.0, 0.0], ..base };
        assert!(matches!(simulate_chain(&m, &c), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn planner() {
        assert_eq!(plan_steps(0.1, 1.0).unwrap(), (0.1f64 * 0.1, 231));
        let (eta, n) = plan_steps(0.05, 2.0).unwrap();
        assert_abs_diff_eq!(eta, 0.0025, epsilon = 1e-15);
        assert_eq!(n, 2397);
        let (_, n) = plan_steps(1.0 - 1e-12, 1.0).unwrap();
        assert_eq!(n, 1);
        assert!(matches!(plan_steps(0.0, 1.0), Err(Error::BadDelta(_))));
        assert!(matches!(plan_steps(1.0, 1.0), Err(Error::BadDelta(_))));
    }

    #[test]
    fn single_chain_sampler_matches_chain() {
        let m = scalar(1.0, 1.0);
        let mut sc = SamplerConfig::new(0.05, 200, 50, 11);
        sc.gap = Some(3);
        let set = sample_invariant(&m, &sc).unwrap();
        let traj = simulate_chain(&m, &sc.em_config(1, 0)).unwrap();
        assert_eq!(set.points, traj.states);
        assert_eq!(set.len(), 200);
    }

    #[test]
    fn sampler_independent_of_thread_count() {
        let m = ModelSpec::erlang2(0.5, 1.0).build().unwrap();
        let mut sc = SamplerConfig::new(0.05, 301, 20, 5);
        sc.n_chains = 4;
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| sample_invariant(&m, &sc).unwrap())
        };
        assert_eq!(run(1), run(3));
    }

    #[test]
    fn density_examples() {
        let m = scalar(1.0, 1.0);
        // g(-1) = 0, eta = 1, z = x
        let p = transition_density(&m, 1.0, &[-1.0], &[-1.0]).unwrap();
        assert_abs_diff_eq!(p, (4.0 * std::f64::consts::PI).powf(-0.5), epsilon = 1e-12);

        let e2 = ModelSpec::erlang2(0.5, 1.0).build().unwrap();
        let x = [0.3, -0.2];
        let eta = 0.1;
        let g = e2.drift(&x);
        let mode = [x[0] + eta * g[0], x[1] + eta * g[1]];
        let det = e2.sigma_sq().determinant();
        let want = ((2.0 * std::f64::consts::PI).powi(2) * eta.powi(2) * det).powf(-0.5);
        assert_abs_diff_eq!(transition_density(&e2, eta, &x, &mode).unwrap(), want, epsilon = 1e-10);

        // Trapezoid over a wide window.
        let h = 1e-3;
        let total: f64 = (-8000..=8000)
            .map(|k| transition_density(&m, 0.5, &[0.4], &[k as f64 * h]).unwrap() * h)
            .sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-8);
    }

    #[test]
    fn moment_of_zero_samples() {
        let set = SampleSet::from_rows(
            2,
            vec![0.0; 6],
            Provenance {
                eta: 0.1,
                burn_in: 0,
                thin: 1,
                seeds: vec![],
                generator: String::new(),
            },
        );
        assert_eq!(moment_estimate(&set, 2.0).unwrap().0, 0.0);
        let empty = SampleSet::from_rows(2, vec![], set.provenance.clone());
        assert!(matches!(moment_estimate(&empty, 2.0), Err(Error::EmptyInput(_))));
    }
}
