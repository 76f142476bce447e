//! Experiment configuration file.

use std::path::{Path, PathBuf};

use phnlab_core::{ModelSpec, TestFunction};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub em: Option<EmBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lyapunov: Option<LyapunovBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub occupation: Option<OccupationBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stats: Option<StatsBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub queue: Option<QueueBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub master_seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_workers: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleFormat {
    #[default]
    Csv,
    Binary,
    Both,
}

/// Invariant-measure sampling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmBlock {
    pub eta: f64,
    pub n_samples: usize,
    pub burn_in: usize,
    #[serde(default)]
    pub gap: Option<usize>,
    #[serde(default = "one")]
    pub n_chains: usize,
    #[serde(default)]
    pub x0: Option<Vec<f64>>,
    #[serde(default)]
    pub format: SampleFormat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LyapunovBlock {
    #[serde(default = "grid_points")]
    pub grid_points: usize,
    #[serde(default = "radius")]
    pub radius: f64,
    /// Fixed weight; scanned when absent.
    #[serde(default)]
    pub kappa: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OccupationBlock {
    #[serde(default)]
    pub x0: Option<Vec<f64>>,
    pub t: f64,
    pub eta: f64,
    pub eps_list: Vec<f64>,
    pub n_paths: usize,
    #[serde(default = "tolerance")]
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StatsBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub converge: Option<ConvergeBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clt: Option<CltBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mdp: Option<MdpBlock>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergeBlock {
    pub eta_list: Vec<f64>,
    pub n_samples: usize,
    #[serde(default = "one")]
    pub n_chains: usize,
    #[serde(default = "ten")]
    pub burn_in_time: f64,
    #[serde(default = "sixteen")]
    pub n_directions: usize,
    /// Fine-step reference used as oracle when the model has more than one phase.
    #[serde(default)]
    pub reference: Option<ReferenceBlock>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceBlock {
    pub eta: f64,
    pub n_samples: usize,
    #[serde(default = "one")]
    pub n_chains: usize,
    #[serde(default = "ten")]
    pub burn_in_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CltBlock {
    pub h: TestFunction,
    pub eta: f64,
    pub n: usize,
    pub replications: usize,
    #[serde(default)]
    pub burn_in: Option<usize>,
    #[serde(default)]
    pub calibration_factor: Option<usize>,
    #[serde(default)]
    pub max_lag: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MdpBlock {
    pub h: TestFunction,
    pub eta: f64,
    pub n_list: Vec<usize>,
    pub a_exponent: f64,
    pub thresholds: Vec<f64>,
    pub replications: usize,
    #[serde(default)]
    pub burn_in: Option<usize>,
    #[serde(default)]
    pub calibration_factor: Option<usize>,
    /// Also run the iid Gaussian surrogate at this length.
    #[serde(default)]
    pub surrogate_n: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QueueBlock {
    pub n_list: Vec<usize>,
    /// Steady-state grid samples per server count.
    pub samples: usize,
    #[serde(default = "fifty")]
    pub burn_in: f64,
    #[serde(default = "unit")]
    pub spacing: f64,
    #[serde(default)]
    pub record_events: bool,
    #[serde(default = "sixteen")]
    pub n_directions: usize,
    /// EM invariant samples to compare against.
    #[serde(default)]
    pub em_reference: Option<ReferenceBlock>,
}

fn one() -> usize {
    1
}
fn ten() -> f64 {
    10.0
}
fn fifty() -> f64 {
    50.0
}
fn unit() -> f64 {
    1.0
}
fn sixteen() -> usize {
    16
}
fn grid_points() -> usize {
    10_000
}
fn radius() -> f64 {
    20.0
}
fn tolerance() -> f64 {
    0.2
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Invalid(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Invalid(format!("cannot parse config {}: {e}", path.display())))
    }

    /// The configuration with runtime-only fields (output location and
    /// worker count) cleared; this is what the config hash covers.
    pub fn hashed_view(&self) -> Self {
        Self {
            output_dir: None,
            n_workers: None,
            ..self.clone()
        }
    }
}

pub(crate) fn require<'a, T>(block: Option<&'a T>, name: &str) -> Result<&'a T, CliError> {
    block.ok_or_else(|| CliError::Invalid(format!("config lacks the `{name}` block")))
}
