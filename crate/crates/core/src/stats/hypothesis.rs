use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};

/// One-sample Kolmogorov-Smirnov statistic `sup |F_n - F|`.
pub fn ks_statistic(sample: &[f64], cdf: impl Fn(f64) -> f64) -> Result<f64> {
    if sample.is_empty() {
        return Err(Error::EmptyInput("ks sample".into()));
    }
    let mut s = sample.to_vec();
    s.sort_by(|a, b| a.total_cmp(b));
    let n = s.len() as f64;
    Ok(s.iter().enumerate().fold(0.0f64, |d, (i, &x)| {
        let f = cdf(x);
        d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n)
    }))
}

/// Survival function of the Kolmogorov distribution,
/// `Q(lambda) = 2 sum_{k>=1} (-1)^{k-1} exp(-2 k^2 lambda^2)`.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-17 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// KS statistic and asymptotic p-value with Stephens' finite-sample
/// correction `lambda = (sqrt(n) + 0.12 + 0.11/sqrt(n)) D`.
pub fn ks_test(sample: &[f64], cdf: impl Fn(f64) -> f64) -> Result<(f64, f64)> {
    let d = ks_statistic(sample, cdf)?;
    let sn = (sample.len() as f64).sqrt();
    Ok((d, kolmogorov_sf((sn + 0.12 + 0.11 / sn) * d)))
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ChiSquareResult {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    /// Number of bins after pooling.
    pub bins: usize,
}

/// Pearson goodness of fit of `counts` against `probs` (same indexing).
/// Adjacent cells are pooled from the right until each expected count is at
/// least `min_expected`; the probability mass beyond the last cell is added
/// to the last bin.
pub fn chi_square_gof(counts: &[u64], probs: &[f64], min_expected: f64) -> Result<ChiSquareResult> {
    if counts.len() != probs.len() || counts.is_empty() {
        return Err(Error::DimensionMismatch("counts and probabilities must align".into()));
    }
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(Error::EmptyInput("no observations".into()));
    }
    let nf = total as f64;
    let mut probs = probs.to_vec();
    let tail = 1.0 - probs.iter().sum::<f64>();
    if tail > 0.0 {
        *probs.last_mut().unwrap() += tail;
    }
    let mut bins: Vec<(f64, f64)> = Vec::new();
    let (mut obs, mut exp) = (0.0, 0.0);
    for (c, p) in counts.iter().zip(&probs) {
        obs += *c as f64;
        exp += p * nf;
        if exp >= min_expected {
            bins.push((obs, exp));
            obs = 0.0;
            exp = 0.0;
        }
    }
    if exp > 0.0 || obs > 0.0 {
        match bins.last_mut() {
            Some(last) => {
                last.0 += obs;
                last.1 += exp;
            }
            None => bins.push((obs, exp)),
        }
    }
    if bins.len() < 2 {
        return Err(Error::InvalidParameter("fewer than two bins after pooling".into()));
    }
    let statistic: f64 = bins.iter().map(|(o, e)| (o - e).powi(2) / e).sum();
    let dof = bins.len() - 1;
    let dist = ChiSquared::new(dof as f64).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    Ok(ChiSquareResult {
        statistic,
        dof,
        p_value: dist.sf(statistic),
        bins: bins.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn kolmogorov_reference_points() {
        // Classical critical values: Q(1.3581) = 0.05, Q(1.6276) = 0.01.
        assert_abs_diff_eq!(kolmogorov_sf(1.3581), 0.05, epsilon = 1e-4);
        assert_abs_diff_eq!(kolmogorov_sf(1.6276), 0.01, epsilon = 1e-4);
        assert_eq!(kolmogorov_sf(0.0), 1.0);
    }

    #[test]
    fn ks_on_exact_grid() {
        let s: Vec<f64> = (0..100).map(|i| (i as f64 + 0.5) / 100.0).collect();
        let d = ks_statistic(&s, |x| x.clamp(0.0, 1.0)).unwrap();
        assert_abs_diff_eq!(d, 0.005, epsilon = 1e-12);
        let (_, p) = ks_test(&s, |x| x.clamp(0.0, 1.0)).unwrap();
        assert!(p > 0.99);
        let (_, p) = ks_test(&s, |x| (x * x).clamp(0.0, 1.0)).unwrap();
        assert!(p < 1e-3);
    }

    #[test]
    fn chi_square_pooling() {
        let r = chi_square_gof(&[50, 30, 15, 4, 1], &[0.5, 0.3, 0.15, 0.04, 0.01], 5.0).unwrap();
        assert_eq!(r.bins, 4);
        assert_abs_diff_eq!(r.statistic, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.p_value, 1.0, epsilon = 1e-12);
        let r = chi_square_gof(&[90, 10], &[0.5, 0.5], 5.0).unwrap();
        assert!(r.p_value < 1e-10);
    }
}
