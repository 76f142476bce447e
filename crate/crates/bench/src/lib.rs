//! Fixtures shared by the benchmarks.

use phnlab_core::{DiffusionModel, ModelSpec};

/// One-phase and Erlang-2 models with `alpha = beta = 1`.
pub fn models() -> [(&'static str, DiffusionModel); 2] {
    [
        ("exp", ModelSpec::exponential(1.0, 1.0).build().expect("valid model")),
        ("erlang2", ModelSpec::erlang2(1.0, 1.0).build().expect("valid model")),
    ]
}

/// Deterministic pseudo-random points in `[-3, 3)` without an RNG dependency.
pub fn spread(n: usize, salt: u64) -> Vec<f64> {
    (0..n as u64)
        .map(|i| {
            let z = phnlab_core::seed::splitmix64(i ^ (salt << 32));
            (z >> 11) as f64 / (1u64 << 53) as f64 * 6.0 - 3.0
        })
        .collect()
}
