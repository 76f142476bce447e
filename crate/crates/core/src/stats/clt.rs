use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::exact1d::norm_cdf;
use super::hypothesis::ks_test;
use super::lrv::{default_max_lag, long_run_variance};
use super::test_fn::TestFunction;
use crate::em::{mean_and_stderr, Stepper};
use crate::error::{Error, Result};
use crate::model::DiffusionModel;
use crate::seed::{self, SeedRole, SimRng};

/// Values of `h` along `n` consecutive states of a chain started at `x0`,
/// recorded after `burn_in` discarded steps. The first recorded state is the
/// one reached after the burn-in.
pub fn ergodic_series(
    model: &DiffusionModel,
    h: &TestFunction,
    eta: f64,
    x0: &[f64],
    burn_in: usize,
    n: usize,
    rng: &mut SimRng,
) -> Result<Vec<f64>> {
    model.check_dim(x0.len())?;
    let mut st = Stepper::new(model, eta, x0);
    st.run(burn_in, rng)?;
    let mut out = Vec::with_capacity(n);
    out.push(h.eval(st.state()));
    for _ in 1..n {
        out.push(h.eval(st.step(rng)?));
    }
    Ok(out)
}

/// `(1/n) sum_{k<n} h(X_k)` without storing the series.
pub fn ergodic_mean(
    model: &DiffusionModel,
    h: &TestFunction,
    eta: f64,
    x0: &[f64],
    burn_in: usize,
    n: usize,
    rng: &mut SimRng,
) -> Result<f64> {
    model.check_dim(x0.len())?;
    let mut st = Stepper::new(model, eta, x0);
    st.run(burn_in, rng)?;
    let mut acc = h.eval(st.state());
    for _ in 1..n {
        acc += h.eval(st.step(rng)?);
    }
    Ok(acc / n as f64)
}

/// Centering constant and long-run variance from one calibration chain.
pub(crate) struct Calibration {
    pub mu_hat: f64,
    pub sigma2_hat: f64,
    pub max_lag: usize,
    pub len: usize,
}

/// Runs the calibration chain of `len` steps. The variance is estimated on
/// the first `lrv_len` values to keep the lag sums affordable.
#[allow(clippy::too_many_arguments)]
pub(crate) fn calibrate(
    model: &DiffusionModel,
    h: &TestFunction,
    eta: f64,
    x0: &[f64],
    burn_in: usize,
    len: usize,
    lrv_len: usize,
    max_lag: Option<usize>,
    seed_value: u64,
) -> Result<Calibration> {
    let mut rng = seed::rng_for(seed_value, SeedRole::Calibration, 0);
    let series = ergodic_series(model, h, eta, x0, burn_in, len, &mut rng)?;
    let mu_hat = series.iter().sum::<f64>() / len as f64;
    let prefix = &series[..lrv_len.min(len)];
    let lag = max_lag.unwrap_or_else(|| correlation_window(prefix.len(), eta)).min(prefix.len() - 1);
    let sigma2_hat = long_run_variance(prefix, Some(lag))?.max(0.0);
    Ok(Calibration { mu_hat, sigma2_hat, max_lag: lag, len })
}

/// Bartlett window for EM series: the cube-root rule, widened to twenty
/// time units because correlations decay on the scale `1/eta` steps.
pub fn correlation_window(n: usize, eta: f64) -> usize {
    default_max_lag(n).max((20.0 / eta).ceil() as usize)
}

/// Settings for the CLT experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CltConfig {
    pub h: TestFunction,
    pub eta: f64,
    /// Chain length per replication.
    pub n: usize,
    pub replications: usize,
    pub seed: u64,
    /// Discarded steps before recording; defaults to `ceil(10/eta)`.
    #[serde(default)]
    pub burn_in: Option<usize>,
    /// Calibration length in units of `n`; defaults to `max(10, replications)`.
    #[serde(default)]
    pub calibration_factor: Option<usize>,
    /// Bartlett window; defaults to [`correlation_window`].
    #[serde(default)]
    pub max_lag: Option<usize>,
    #[serde(default)]
    pub x0: Option<Vec<f64>>,
}

impl CltConfig {
    pub fn new(h: TestFunction, eta: f64, n: usize, replications: usize, seed: u64) -> Self {
        Self {
            h,
            eta,
            n,
            replications,
            seed,
            burn_in: None,
            calibration_factor: None,
            max_lag: None,
            x0: None,
        }
    }

    pub fn burn_in(&self) -> usize {
        self.burn_in.unwrap_or_else(|| burn_in_steps(self.eta))
    }

    pub fn calibration_factor(&self) -> usize {
        self.calibration_factor.unwrap_or(self.replications.max(10))
    }
}

pub(crate) fn burn_in_steps(eta: f64) -> usize {
    (10.0 / eta).ceil() as usize
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CltReport {
    pub h_id: String,
    pub n: usize,
    pub eta: f64,
    pub replications: usize,
    /// `sqrt(n) (E_n(h) - mu_hat)` per replication, in replication order.
    pub normalized_values: Vec<f64>,
    /// Raw ergodic means per replication.
    pub ergodic_means: Vec<f64>,
    pub mu_hat: f64,
    pub calibration_length: usize,
    pub max_lag: usize,
    pub sigma_h2_hat: f64,
    /// Sample variance of the normalized values, the replication-side
    /// estimate of the same limit variance.
    pub replication_variance: f64,
    pub mean_of_means: f64,
    pub mean_of_means_stderr: f64,
    /// KS statistic and p-value against `N(0, sigma_h2_hat)`; absent when
    /// degenerate.
    pub test_statistic: Option<f64>,
    pub p_value: Option<f64>,
    /// Set when the estimated variance vanishes (e.g. constant `h`).
    pub degenerate: bool,
}

/// Runs `replications` independent chains and tests the normalized ergodic
/// means for normality with the calibrated long-run variance.
pub fn clt_experiment(model: &DiffusionModel, config: &CltConfig) -> Result<CltReport> {
    let d = model.dim();
    config.h.validate(d)?;
    if !(config.eta > 0.0 && config.eta < (-1.0f64).exp()) {
        return Err(Error::InvalidParameter(format!("eta must lie in (0, 1/e), got {}", config.eta)));
    }
    if config.replications < 50 {
        return Err(Error::InvalidParameter(format!(
            "at least 50 replications are required, got {}",
            config.replications
        )));
    }
    if config.n < 2 {
        return Err(Error::SeriesTooShort { len: config.n, needed: 2 });
    }
    let x0 = config.x0.clone().unwrap_or_else(|| vec![0.0; d]);
    model.check_dim(x0.len())?;
    let burn_in = config.burn_in();
    let cal_len = config.n.saturating_mul(config.calibration_factor().max(1));
    let cal = calibrate(
        model,
        &config.h,
        config.eta,
        &x0,
        burn_in,
        cal_len,
        config.n.saturating_mul(10),
        config.max_lag,
        config.seed,
    )?;

    let means: Vec<f64> = (0..config.replications as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = seed::rng_for(config.seed, SeedRole::Replication, r);
            ergodic_mean(model, &config.h, config.eta, &x0, burn_in, config.n, &mut rng)
        })
        .collect::<Result<_>>()?;
    let sqrt_n = (config.n as f64).sqrt();
    let normalized: Vec<f64> = means.iter().map(|m| sqrt_n * (m - cal.mu_hat)).collect();
    let (mean_of_means, mean_of_means_stderr) = mean_and_stderr(&means);
    let (_, se_norm) = mean_and_stderr(&normalized);
    let replication_variance = se_norm * se_norm * normalized.len() as f64;

    let degenerate = cal.sigma2_hat <= 1e-14;
    let (test_statistic, p_value) = if degenerate {
        (None, None)
    } else {
        let s = cal.sigma2_hat.sqrt();
        let (stat, p) = ks_test(&normalized, |x| norm_cdf(x / s))?;
        (Some(stat), Some(p))
    };
    Ok(CltReport {
        h_id: config.h.id(),
        n: config.n,
        eta: config.eta,
        replications: config.replications,
        normalized_values: normalized,
        ergodic_means: means,
        mu_hat: cal.mu_hat,
        calibration_length: cal.len,
        max_lag: cal.max_lag,
        sigma_h2_hat: cal.sigma2_hat,
        replication_variance,
        mean_of_means,
        mean_of_means_stderr,
        test_statistic,
        p_value,
        degenerate,
    })
}
