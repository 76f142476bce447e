//! Invariant-measure approximation for the limiting diffusion of the
//! M/Ph/n+M queue in the Halfin-Whitt regime.
//!
//! The crate builds the piecewise-linear diffusion from phase-type service
//! primitives ([`model`]), samples its Euler-Maruyama chain ([`em`]), and
//! provides the diagnostics used to check the approximation: Lyapunov drift
//! audits ([`lyapunov`]), weighted occupation times ([`occupation`]),
//! Wasserstein/CLT/MDP statistics ([`stats`]) and a direct CTMC simulation
//! of the queue itself ([`queue`]).

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod em;
pub mod error;
pub mod io;
pub mod linalg;
pub mod lyapunov;
pub mod model;
pub mod occupation;
pub mod queue;
pub mod seed;
pub mod stats;

pub use em::{EmConfig, Provenance, SampleSet, SamplerConfig, Trajectory};
pub use error::{Error, Result};
pub use lyapunov::LyapunovSpec;
pub use model::{DiffusionModel, ModelSpec, PhaseTypeService};
pub use queue::{QueueConfig, QueueState};
pub use seed::{derive_seed, SeedRole};
pub use stats::{CltReport, EmpiricalMeasure, Exact1DInvariant, TestFunction};
