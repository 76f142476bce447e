use rayon::prelude::*;

use crate::error::{Error, Result};

/// `floor(n^{1/3})`, at least 1.
pub fn default_max_lag(n: usize) -> usize {
    ((n as f64).cbrt() + 1e-9).floor().max(1.0) as usize
}

/// Bartlett-windowed long-run variance
/// `gamma_0 + 2 sum_{i=1}^{L} (1 - i/(L+1)) gamma_i` with
/// `L = max_lag.unwrap_or(floor(n^{1/3}))` and biased autocovariances
/// `gamma_i = (1/n) sum_t (x_t - xbar)(x_{t+i} - xbar)`.
pub fn long_run_variance(series: &[f64], max_lag: Option<usize>) -> Result<f64> {
    let n = series.len();
    let lag = max_lag.unwrap_or_else(|| default_max_lag(n));
    if n < 2 || n <= lag {
        return Err(Error::SeriesTooShort { len: n, needed: lag.max(1) });
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let c: Vec<f64> = series.iter().map(|x| x - mean).collect();
    let autocov = |i: usize| -> f64 { c[..n - i].iter().zip(&c[i..]).map(|(a, b)| a * b).sum::<f64>() / n as f64 };
    let weighted: Vec<f64> = (1..=lag)
        .into_par_iter()
        .map(|i| (1.0 - i as f64 / (lag as f64 + 1.0)) * autocov(i))
        .collect();
    Ok(autocov(0) + 2.0 * weighted.iter().sum::<f64>())
}
