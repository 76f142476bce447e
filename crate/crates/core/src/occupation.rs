//! Weighted occupation time near the drift kink `e'x = 0`:
//!
//! ```text
//! L_t = int_0^t [1 - (e'X_s)^2 / eps^2] 1{|e'X_s| <= eps} ds
//! ```
//!
//! estimated by left-endpoint Riemann sums along EM paths.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::em::{mean_and_stderr, Stepper, Trajectory};
use crate::error::{Error, Result};
use crate::model::DiffusionModel;
use crate::seed::{self, SeedRole};

/// `phi_eps`: `C^2` function whose second derivative is the occupation weight.
pub fn phi_eps(y: f64, eps: f64) -> f64 {
    if y > eps {
        2.0 / 3.0 * eps * y - 0.25 * eps * eps
    } else if y < -eps {
        -2.0 / 3.0 * eps * y - 0.25 * eps * eps
    } else {
        -y.powi(4) / (12.0 * eps * eps) + 0.5 * y * y
    }
}

/// `phi_eps'' (y) = [1 - y^2/eps^2] 1{|y| <= eps}`.
pub fn phi_eps_ddot(y: f64, eps: f64) -> f64 {
    if y.abs() <= eps {
        1.0 - y * y / (eps * eps)
    } else {
        0.0
    }
}

/// Occupation weight of a state.
#[inline]
pub fn occupation_weight(x: &[f64], eps: f64) -> f64 {
    phi_eps_ddot(x.iter().sum(), eps)
}

/// Riemann sum over the stored states, each standing for an interval of
/// length `eta * stride`.
pub fn weighted_occupation(trajectory: &Trajectory, eps: f64) -> Result<f64> {
    if trajectory.is_empty() {
        return Err(Error::EmptyInput("trajectory".into()));
    }
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter(format!("eps must be positive, got {eps}")));
    }
    let dt = trajectory.eta * trajectory.stride as f64;
    Ok(dt * trajectory.rows().map(|x| occupation_weight(x, eps)).sum::<f64>())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupationEstimate {
    pub epsilon: f64,
    pub t_horizon: f64,
    pub mean_l: f64,
    pub stderr: f64,
    pub n_paths: usize,
}

impl OccupationEstimate {
    pub fn ratio_to_epsilon(&self) -> f64 {
        self.mean_l / self.epsilon
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupationReport {
    pub eta: f64,
    pub x0: Vec<f64>,
    pub estimates: Vec<OccupationEstimate>,
    /// Largest pairwise relative gap between the ratios `L/eps`.
    pub max_ratio_spread: f64,
    /// True when the spread is within `tolerance`.
    pub linear_in_eps: bool,
    pub tolerance: f64,
}

impl OccupationReport {
    /// CSV body: `epsilon,mean_L,stderr,ratio_to_epsilon`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epsilon,mean_L,stderr,ratio_to_epsilon\n");
        for e in &self.estimates {
            s.push_str(&format!(
                "{},{},{},{}\n",
                crate::io::fmt_f64(e.epsilon),
                crate::io::fmt_f64(e.mean_l),
                crate::io::fmt_f64(e.stderr),
                crate::io::fmt_f64(e.ratio_to_epsilon())
            ));
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupationConfig {
    pub x0: Vec<f64>,
    pub t: f64,
    pub eta: f64,
    pub eps_list: Vec<f64>,
    pub n_paths: usize,
    pub seed: u64,
    /// Pairwise agreement required of `L/eps` for the linear verdict.
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
}

fn default_tolerance() -> f64 {
    0.2
}

/// Estimates `E L_t` for every `eps` on common EM paths and checks that
/// `E L / eps` is roughly constant.
pub fn occupation_scaling_check(model: &DiffusionModel, cfg: &OccupationConfig) -> Result<OccupationReport> {
    model.check_dim(cfg.x0.len())?;
    if cfg.eps_list.len() < 3 {
        return Err(Error::InvalidParameter("eps_list needs at least 3 values".into()));
    }
    if cfg.eps_list.windows(2).any(|w| !(w[1] < w[0])) || cfg.eps_list.iter().any(|e| !(*e > 0.0)) {
        return Err(Error::InvalidParameter("eps_list must be positive and strictly decreasing".into()));
    }
    if cfg.n_paths == 0 || !(cfg.t >= 0.0) {
        return Err(Error::InvalidParameter("need n_paths >= 1 and t >= 0".into()));
    }
    if !(cfg.eta > 0.0) {
        return Err(Error::InvalidParameter(format!("eta must be positive, got {}", cfg.eta)));
    }
    let eps_min = *cfg.eps_list.last().unwrap();
    if cfg.eta > eps_min / 10.0 {
        return Err(Error::ResolutionTooCoarse {
            eta: cfg.eta,
            limit: eps_min / 10.0,
        });
    }
    let n_steps = (cfg.t / cfg.eta).round() as usize;
    let k = cfg.eps_list.len();

    let per_path: Vec<Vec<f64>> = (0..cfg.n_paths as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = seed::rng_for(cfg.seed, SeedRole::Replication, i);
            let mut st = Stepper::new(model, cfg.eta, &cfg.x0);
            let mut acc = vec![0.0; k];
            for _ in 0..n_steps {
                let s: f64 = st.state().iter().sum();
                for (a, &eps) in acc.iter_mut().zip(&cfg.eps_list) {
                    *a += phi_eps_ddot(s, eps);
                }
                st.step(&mut rng)?;
            }
            Ok(acc.into_iter().map(|a| a * cfg.eta).collect())
        })
        .collect::<Result<_>>()?;

    let estimates: Vec<OccupationEstimate> = (0..k)
        .map(|j| {
            let vals: Vec<f64> = per_path.iter().map(|p| p[j]).collect();
            let (mean_l, stderr) = mean_and_stderr(&vals);
            OccupationEstimate {
                epsilon: cfg.eps_list[j],
                t_horizon: n_steps as f64 * cfg.eta,
                mean_l,
                stderr,
                n_paths: cfg.n_paths,
            }
        })
        .collect();

    let ratios: Vec<f64> = estimates.iter().map(|e| e.ratio_to_epsilon()).collect();
    let mut spread: f64 = 0.0;
    for i in 0..k {
        for j in i + 1..k {
            let denom = ratios[i].abs().max(ratios[j].abs());
            if denom > 0.0 {
                spread = spread.max((ratios[i] - ratios[j]).abs() / denom);
            }
        }
    }
    Ok(OccupationReport {
        eta: cfg.eta,
        x0: cfg.x0.clone(),
        estimates,
        max_ratio_spread: spread,
        linear_in_eps: spread <= cfg.tolerance,
        tolerance: cfg.tolerance,
    })
}
