use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::clt::{burn_in_steps, calibrate, ergodic_mean};
use super::exact1d::norm_sf;
use super::lrv::long_run_variance;
use super::test_fn::TestFunction;
use crate::error::{Error, Result};
use crate::model::DiffusionModel;
use crate::seed::{self, SeedRole};

/// Settings for the moderate-deviation check on the diffusion model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MdpConfig {
    pub h: TestFunction,
    pub eta: f64,
    pub n_list: Vec<usize>,
    /// `a_n = n^a_exponent`, with the exponent in `(0, 1/2)`.
    pub a_exponent: f64,
    pub thresholds: Vec<f64>,
    pub replications: usize,
    pub seed: u64,
    #[serde(default)]
    pub burn_in: Option<usize>,
    /// Calibration length in units of `max(n_list)`; defaults to 10.
    #[serde(default)]
    pub calibration_factor: Option<usize>,
    #[serde(default)]
    pub max_lag: Option<usize>,
    #[serde(default)]
    pub x0: Option<Vec<f64>>,
}

/// Settings for the iid Gaussian surrogate, whose tail is known exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateConfig {
    pub n: usize,
    pub a_exponent: f64,
    pub thresholds: Vec<f64>,
    pub replications: usize,
    pub seed: u64,
    #[serde(default = "unit")]
    pub variance: f64,
}

fn unit() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MdpRow {
    pub n: usize,
    pub a_n: f64,
    pub z: f64,
    pub replications: usize,
    /// Replications landing in the event (under the sampling law used).
    pub hits: usize,
    /// Hit count a Gaussian tail with the calibrated variance would predict
    /// under plain sampling.
    pub expected_hits: f64,
    pub p_hat: f64,
    /// `log(p_hat) / a_n^2`; absent when there were no hits.
    pub log_rate: Option<f64>,
    /// `-z^2 / (2 sigma_h2_hat)`.
    pub theoretical_rate: f64,
    /// `log_rate / theoretical_rate`; absent for zero hits or `z = 0`.
    pub ratio: Option<f64>,
    pub zero_hits: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MdpReport {
    pub h_id: String,
    pub a_exponent: f64,
    pub mu_hat: f64,
    pub sigma_h2_hat: f64,
    pub importance_sampled: bool,
    pub rows: Vec<MdpRow>,
    pub zero_hit_rows: usize,
}

fn check_common(a_exponent: f64, thresholds: &[f64], replications: usize) -> Result<()> {
    if !(a_exponent > 0.0 && a_exponent < 0.5) {
        return Err(Error::InvalidParameter(format!("a_exponent must lie in (0, 1/2), got {a_exponent}")));
    }
    if thresholds.is_empty() || thresholds.iter().any(|z| !(*z >= 0.0 && z.is_finite())) {
        return Err(Error::InvalidParameter("thresholds must be non-empty and non-negative".into()));
    }
    if replications == 0 {
        return Err(Error::InvalidParameter("replications must be positive".into()));
    }
    Ok(())
}

fn make_row(n: usize, a_n: f64, z: f64, replications: usize, hits: usize, p_hat: f64, sigma2: f64) -> MdpRow {
    let theoretical_rate = -z * z / (2.0 * sigma2);
    let zero_hits = hits == 0 || p_hat <= 0.0;
    let log_rate = (!zero_hits).then(|| p_hat.ln() / (a_n * a_n));
    let ratio = match log_rate {
        Some(r) if z > 0.0 => Some(r / theoretical_rate),
        _ => None,
    };
    MdpRow {
        n,
        a_n,
        z,
        replications,
        hits,
        expected_hits: replications as f64 * norm_sf(a_n * z / sigma2.sqrt()),
        p_hat,
        log_rate,
        theoretical_rate,
        ratio,
        zero_hits,
    }
}

/// Plain Monte Carlo estimate of `P(sqrt(n)/a_n (E_n(h) - mu_hat) >= z)` for
/// each `n` and `z`. Empty events are reported through `zero_hits`.
pub fn mdp_rate_check(model: &DiffusionModel, config: &MdpConfig) -> Result<MdpReport> {
    let d = model.dim();
    config.h.validate(d)?;
    check_common(config.a_exponent, &config.thresholds, config.replications)?;
    if config.n_list.is_empty() || config.n_list.iter().any(|&n| n < 2) {
        return Err(Error::InvalidParameter("n_list must hold lengths of at least 2".into()));
    }
    let x0 = config.x0.clone().unwrap_or_else(|| vec![0.0; d]);
    model.check_dim(x0.len())?;
    let burn_in = config.burn_in.unwrap_or_else(|| burn_in_steps(config.eta));
    let n_max = *config.n_list.iter().max().unwrap();
    let cal_len = n_max.saturating_mul(config.calibration_factor.unwrap_or(10).max(1));
    let cal = calibrate(model, &config.h, config.eta, &x0, burn_in, cal_len, cal_len, config.max_lag, config.seed)?;
    if cal.sigma2_hat <= 1e-14 {
        return Err(Error::InvalidParameter("test function has zero long-run variance".into()));
    }

    let mut rows = Vec::new();
    for (k, &n) in config.n_list.iter().enumerate() {
        let base = (k * config.replications) as u64;
        let means: Vec<f64> = (0..config.replications as u64)
            .into_par_iter()
            .map(|r| {
                let mut rng = seed::rng_for(config.seed, SeedRole::Replication, base + r);
                ergodic_mean(model, &config.h, config.eta, &x0, burn_in, n, &mut rng)
            })
            .collect::<Result<_>>()?;
        let a_n = (n as f64).powf(config.a_exponent);
        let scale = (n as f64).sqrt() / a_n;
        for &z in &config.thresholds {
            let hits = means.iter().filter(|m| scale * (*m - cal.mu_hat) >= z).count();
            let p_hat = hits as f64 / config.replications as f64;
            rows.push(make_row(n, a_n, z, config.replications, hits, p_hat, cal.sigma2_hat));
        }
    }
    Ok(MdpReport {
        h_id: config.h.id(),
        a_exponent: config.a_exponent,
        mu_hat: cal.mu_hat,
        sigma_h2_hat: cal.sigma2_hat,
        importance_sampled: false,
        zero_hit_rows: rows.iter().filter(|r| r.zero_hits).count(),
        rows,
    })
}

/// The same check on iid `N(0, variance)` series. Each threshold is
/// estimated by exponential tilting: every series is drawn with its mean
/// shifted to the boundary of the event and reweighted by the likelihood
/// ratio, which makes tails far below `1/replications` measurable.
/// The centring `mu_hat` and variance come from a calibration series of
/// length `10 n`, exactly as for the diffusion.
pub fn mdp_gaussian_surrogate(config: &SurrogateConfig) -> Result<MdpReport> {
    check_common(config.a_exponent, &config.thresholds, config.replications)?;
    if config.n < 2 {
        return Err(Error::SeriesTooShort { len: config.n, needed: 2 });
    }
    if !(config.variance > 0.0 && config.variance.is_finite()) {
        return Err(Error::InvalidParameter(format!("variance must be positive, got {}", config.variance)));
    }
    let n = config.n;
    let nf = n as f64;
    let s = config.variance.sqrt();
    let cal_series: Vec<f64> = {
        let mut rng = seed::rng_for(config.seed, SeedRole::Calibration, 0);
        (0..10 * n).map(|_| s * rng.sample::<f64, _>(StandardNormal)).collect()
    };
    let mu_hat = cal_series.iter().sum::<f64>() / cal_series.len() as f64;
    let sigma2_hat = long_run_variance(&cal_series, None)?;
    drop(cal_series);

    let a_n = nf.powf(config.a_exponent);
    let mut rows = Vec::new();
    for (k, &z) in config.thresholds.iter().enumerate() {
        // Event: sum >= n mu_hat + z a_n sqrt(n). Tilt the mean to its edge.
        let threshold = nf * mu_hat + z * a_n * nf.sqrt();
        let m = threshold / nf;
        let base = (k * config.replications) as u64;
        let draws: Vec<(bool, f64)> = (0..config.replications as u64)
            .into_par_iter()
            .map(|r| {
                let mut rng = seed::rng_for(config.seed, SeedRole::Replication, base + r);
                let mut sum = 0.0;
                for _ in 0..n {
                    sum += m + s * rng.sample::<f64, _>(StandardNormal);
                }
                let log_w = -(m / config.variance) * sum + nf * m * m / (2.0 * config.variance);
                (sum >= threshold, log_w)
            })
            .collect();
        let hits = draws.iter().filter(|(hit, _)| *hit).count();
        let p_hat = draws.iter().filter(|(hit, _)| *hit).map(|(_, lw)| lw.exp()).sum::<f64>()
            / config.replications as f64;
        rows.push(make_row(n, a_n, z, config.replications, hits, p_hat, sigma2_hat));
    }
    Ok(MdpReport {
        h_id: "iid_gaussian".into(),
        a_exponent: config.a_exponent,
        mu_hat,
        sigma_h2_hat: sigma2_hat,
        importance_sampled: true,
        zero_hit_rows: rows.iter().filter(|r| r.zero_hits).count(),
        rows,
    })
}
