use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{diffusion_scale, simulate_queue, EventRecord, QueueConfig};
use crate::em::SampleSet;
use crate::error::{Error, Result};
use crate::model::DiffusionModel;
use crate::stats::{w1_sliced, w1_to_quantiles, EmpiricalMeasure, Exact1DInvariant};

/// Distances for one server count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub n: usize,
    pub lambda_n: f64,
    pub samples: usize,
    /// Sliced W1 to the EM invariant samples.
    pub w1_em: Option<f64>,
    /// W1 to the exact one-dimensional law.
    pub w1_exact: Option<f64>,
    pub busy_fraction: f64,
    pub arrivals: u64,
    pub abandonments: u64,
    /// Scaled grid samples behind the distances.
    #[serde(skip)]
    pub scaled: Option<SampleSet>,
    /// Event log when the run recorded one.
    #[serde(skip)]
    pub events: Option<Vec<EventRecord>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueueCompareReport {
    pub rows: Vec<CompareRow>,
    /// `w1(n_{i+1}) / w1(n_i)` for the exact oracle when present, else the EM one.
    pub successive_ratios: Vec<f64>,
    /// Mean of `w1 sqrt(n)` over the rows: the fitted constant of `C/sqrt(n)`.
    pub c_fit: Option<f64>,
}

/// Scaled steady-state samples of the queue compared with EM invariant
/// samples and, in one dimension, the exact law. The queue and the model
/// must share every primitive.
pub fn steady_state_compare(
    queue: &QueueConfig,
    model: &DiffusionModel,
    em_samples: Option<&SampleSet>,
    oracle: Option<&Exact1DInvariant>,
    n_directions: usize,
) -> Result<CompareRow> {
    let queue_model = DiffusionModel::new(&queue.pt, queue.alpha, queue.beta)?;
    if !queue_model.same_parameters(model) {
        return Err(Error::ParameterMismatch(
            "queue and diffusion model differ in (p, P, v, alpha, beta)".into(),
        ));
    }
    if let Some(law) = oracle {
        if model.dim() != 1 || law.alpha() != model.alpha() || law.beta() != model.beta() {
            return Err(Error::ParameterMismatch("exact oracle does not match the model".into()));
        }
    }
    if let Some(em) = em_samples {
        if em.dim != model.dim() {
            return Err(Error::DimensionMismatch(format!("EM samples have dimension {}", em.dim)));
        }
    }
    let path = simulate_queue(queue)?;
    if path.is_empty() {
        return Err(Error::EmptyInput("no grid samples after burn-in".into()));
    }
    let gamma: Vec<f64> = model.gamma().iter().copied().collect();
    let scaled = diffusion_scale(&path, queue.n, &gamma)?;
    let w1_em = em_samples
        .map(|em| {
            let a = EmpiricalMeasure::from_samples(&scaled)?;
            let b = EmpiricalMeasure::from_samples(em)?;
            w1_sliced(&a, &b, n_directions, queue.seed)
        })
        .transpose()?;
    let w1_exact = oracle
        .map(|law| w1_to_quantiles(&scaled.points, |u| law.quantile(u)))
        .transpose()?;
    Ok(CompareRow {
        n: queue.n,
        lambda_n: queue.lambda_n(),
        samples: path.len(),
        w1_em,
        w1_exact,
        busy_fraction: path.counters.busy_fraction,
        arrivals: path.counters.arrivals,
        abandonments: path.counters.abandonments,
        scaled: Some(scaled),
        events: path.events,
    })
}

/// Runs [`steady_state_compare`] for each server count in parallel, with
/// replication index `i` for the `i`-th count.
pub fn queue_compare_sweep(
    base: &QueueConfig,
    n_list: &[usize],
    model: &DiffusionModel,
    em_samples: Option<&SampleSet>,
    oracle: Option<&Exact1DInvariant>,
    n_directions: usize,
) -> Result<QueueCompareReport> {
    if n_list.is_empty() {
        return Err(Error::InvalidParameter("n_list must not be empty".into()));
    }
    let rows: Vec<CompareRow> = n_list
        .par_iter()
        .enumerate()
        .map(|(i, &n)| {
            let mut cfg = base.clone();
            cfg.n = n;
            cfg.replication = i as u64;
            cfg.initial = None;
            steady_state_compare(&cfg, model, em_samples, oracle, n_directions)
        })
        .collect::<Result<_>>()?;
    let metric = |r: &CompareRow| r.w1_exact.or(r.w1_em);
    let successive_ratios = rows
        .windows(2)
        .filter_map(|w| Some(metric(&w[1])? / metric(&w[0])?))
        .collect();
    let scaled: Vec<f64> = rows.iter().filter_map(|r| Some(metric(r)? * (r.n as f64).sqrt())).collect();
    let c_fit = (!scaled.is_empty()).then(|| scaled.iter().sum::<f64>() / scaled.len() as f64);
    Ok(QueueCompareReport {
        rows,
        successive_ratios,
        c_fit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelSpec;

    #[test]
    fn mismatched_alpha_is_rejected() {
        let model = ModelSpec::exponential(1.0, 1.0).build().unwrap();
        let other = ModelSpec::exponential(2.0, 1.0).build().unwrap();
        let cfg = QueueConfig::new(25, other.phase_type(), 2.0, 1.0, 100.0, 1).unwrap();
        let err = steady_state_compare(&cfg, &model, None, None, 4).unwrap_err();
        assert!(matches!(err, Error::ParameterMismatch(_)));
    }

    #[test]
    fn exact_oracle_distance_is_small() {
        let model = ModelSpec::exponential(1.0, 1.0).build().unwrap();
        let law = Exact1DInvariant::new(1.0, 1.0).unwrap();
        let mut cfg = QueueConfig::new(100, model.phase_type(), 1.0, 1.0, 0.0, 2).unwrap();
        cfg.horizon = QueueConfig::horizon_for(cfg.burn_in, cfg.spacing, 3000);
        let row = steady_state_compare(&cfg, &model, None, Some(&law), 4).unwrap();
        assert_eq!(row.samples, 3000);
        assert!(row.w1_exact.unwrap() < 0.2);
    }
}
