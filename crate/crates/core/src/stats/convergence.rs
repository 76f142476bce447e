use serde::{Deserialize, Serialize};

use super::exact1d::Exact1DInvariant;
use super::wasserstein::{w1_sliced, w1_to_quantiles, EmpiricalMeasure};
use crate::em::{sample_invariant, SampleSet, SamplerConfig};
use crate::error::{Error, Result};
use crate::model::DiffusionModel;
use crate::seed::{self, SeedRole};

/// Reference law for the sweep.
#[derive(Debug, Clone)]
pub enum Oracle {
    /// Exact stationary law of the one-dimensional diffusion.
    Exact1D(Exact1DInvariant),
    /// Samples from a much finer step size.
    Reference(SampleSet),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    /// At least three step sizes in geometric progression.
    pub eta_list: Vec<f64>,
    pub n_samples: usize,
    pub seed: u64,
    #[serde(default = "one")]
    pub n_chains: usize,
    /// Burn-in measured in time units; `ceil(burn_in_time / eta)` steps.
    #[serde(default = "ten")]
    pub burn_in_time: f64,
    /// Projection count for the sliced distance (ignored in one dimension).
    #[serde(default = "sixteen")]
    pub n_directions: usize,
}

fn one() -> usize {
    1
}
fn ten() -> f64 {
    10.0
}
fn sixteen() -> usize {
    16
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub eta: f64,
    pub w1: f64,
    /// `C sqrt(eta)` with `C` fitted at the largest step.
    pub envelope: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    /// `"w1"` against the exact law, `"sliced-w1"` against reference samples.
    pub metric: String,
    pub rows: Vec<SweepRow>,
    pub c_fit: f64,
    /// Least-squares slope of `log w1` on `log eta`.
    pub slope: f64,
    /// Errors never grow as the step shrinks.
    pub non_increasing: bool,
    /// Largest `w1 / envelope` over the sweep.
    pub max_envelope_ratio: f64,
}

/// Least-squares slope of `log y` against `log x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::DimensionMismatch("slope needs two aligned series of length >= 2".into()));
    }
    if x.iter().chain(y).any(|v| !(*v > 0.0)) {
        return Err(Error::InvalidParameter("log-log slope needs positive values".into()));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidParameter("all x values coincide".into()));
    }
    Ok(sxy / sxx)
}

fn check_geometric(etas: &[f64]) -> Result<()> {
    if etas.len() < 3 {
        return Err(Error::InvalidParameter("eta_list needs at least three values".into()));
    }
    if etas.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
        return Err(Error::InvalidParameter("eta values must be positive".into()));
    }
    let q = etas[1] / etas[0];
    let geometric = (q - 1.0).abs() > 1e-9 && etas.windows(2).all(|w| ((w[1] / w[0]) / q - 1.0).abs() < 1e-6);
    if !geometric {
        return Err(Error::InvalidParameter("eta_list must be a geometric progression".into()));
    }
    Ok(())
}

/// Distance between EM samples at `eta` and the oracle.
pub fn distance_to_oracle(samples: &SampleSet, oracle: &Oracle, n_directions: usize, seed_value: u64) -> Result<f64> {
    match oracle {
        Oracle::Exact1D(law) => {
            if samples.dim != 1 {
                return Err(Error::DimensionMismatch("exact oracle is one-dimensional".into()));
            }
            w1_to_quantiles(&samples.points, |u| law.quantile(u))
        }
        Oracle::Reference(reference) => {
            let a = EmpiricalMeasure::from_samples(samples)?;
            let b = EmpiricalMeasure::from_samples(reference)?;
            w1_sliced(&a, &b, n_directions, seed_value)
        }
    }
}

/// Runs the invariant sampler at each step size and measures its distance
/// to the oracle. Step size `i` samples with seed `derive(seed, Replication, i)`.
pub fn w1_convergence_sweep(model: &DiffusionModel, config: &SweepConfig, oracle: &Oracle) -> Result<SweepReport> {
    check_geometric(&config.eta_list)?;
    if !(config.burn_in_time >= 0.0) {
        return Err(Error::InvalidParameter("burn_in_time must be non-negative".into()));
    }
    let mut w1s = Vec::with_capacity(config.eta_list.len());
    for (i, &eta) in config.eta_list.iter().enumerate() {
        let mut sc = SamplerConfig::new(
            eta,
            config.n_samples,
            (config.burn_in_time / eta).ceil() as usize,
            seed::derive_seed(config.seed, SeedRole::Replication, i as u64),
        );
        sc.n_chains = config.n_chains;
        let samples = sample_invariant(model, &sc)?;
        w1s.push(distance_to_oracle(&samples, oracle, config.n_directions, config.seed)?);
    }
    let (i_max, eta_max) = config
        .eta_list
        .iter()
        .copied()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();
    let c_fit = w1s[i_max] / eta_max.sqrt();
    let rows: Vec<SweepRow> = config
        .eta_list
        .iter()
        .zip(&w1s)
        .map(|(&eta, &w1)| SweepRow { eta, w1, envelope: c_fit * eta.sqrt() })
        .collect();
    let mut by_eta: Vec<&SweepRow> = rows.iter().collect();
    by_eta.sort_by(|a, b| b.eta.total_cmp(&a.eta));
    let non_increasing = by_eta.windows(2).all(|w| w[1].w1 <= w[0].w1);
    let max_envelope_ratio = rows.iter().map(|r| r.w1 / r.envelope).fold(0.0, f64::max);
    let slope = log_log_slope(&config.eta_list, &w1s)?;
    Ok(SweepReport {
        metric: match oracle {
            Oracle::Exact1D(_) => "w1".into(),
            Oracle::Reference(_) => "sliced-w1".into(),
        },
        rows,
        c_fit,
        slope,
        non_increasing,
        max_envelope_ratio,
    })
}
