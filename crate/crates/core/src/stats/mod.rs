//! Empirical measures, Wasserstein-1 distances, the exact one-dimensional
//! stationary law, long-run variance and the CLT / MDP experiments.

mod clt;
mod convergence;
mod exact1d;
mod hypothesis;
mod lrv;
mod mdp;
mod test_fn;
mod wasserstein;

pub use clt::{clt_experiment, ergodic_mean, ergodic_series, CltConfig, CltReport};
pub use convergence::{log_log_slope, w1_convergence_sweep, Oracle, SweepConfig, SweepReport, SweepRow};
pub use exact1d::{norm_cdf, norm_quantile, norm_sf, Exact1DInvariant};
pub use hypothesis::{chi_square_gof, kolmogorov_sf, ks_statistic, ks_test, ChiSquareResult};
pub use lrv::{default_max_lag, long_run_variance};
pub use mdp::{mdp_gaussian_surrogate, mdp_rate_check, MdpConfig, MdpReport, MdpRow, SurrogateConfig};
pub use test_fn::TestFunction;
pub use wasserstein::{sliced_directions, w1_1d, w1_sliced, w1_to_quantiles, EmpiricalMeasure};
