use rand::Rng;
use statrs::function::erf::{erfc, erfc_inv};

use crate::error::{Error, Result};
use crate::seed::SimRng;

const SQRT_2: f64 = std::f64::consts::SQRT_2;

/// Standard normal CDF.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

/// Standard normal survival function.
pub fn norm_sf(x: f64) -> f64 {
    0.5 * erfc(x / SQRT_2)
}

/// Standard normal quantile.
pub fn norm_quantile(q: f64) -> f64 {
    -SQRT_2 * erfc_inv(2.0 * q)
}

/// Stationary law of the one-phase diffusion `g(x) = -beta - x + (1 - alpha) x^+`,
/// `sigma^2 = 2`:
///
/// ```text
/// pi(x) ∝ exp(-beta x - x^2 / 2)        x <= 0
/// pi(x) ∝ exp(-beta x - alpha x^2 / 2)  x >  0
/// ```
///
/// Both halves are Gaussian pieces, so the CDF and its inverse are closed
/// form in the normal CDF.
#[derive(Debug, Clone, PartialEq)]
pub struct Exact1DInvariant {
    alpha: f64,
    beta: f64,
    log_z: f64,
    /// Mass on `x <= 0`.
    w_left: f64,
    /// `Phi(beta)`: left tail normalizer.
    phi_beta: f64,
    /// `Phi_bar(beta / sqrt(alpha))`: right tail normalizer.
    sf_right: f64,
}

fn log_add(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

impl Exact1DInvariant {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::BadAlpha(alpha));
        }
        if !beta.is_finite() {
            return Err(Error::InvalidParameter(format!("beta must be finite, got {beta}")));
        }
        let ln_2pi = (2.0 * std::f64::consts::PI).ln();
        let phi_beta = norm_cdf(beta);
        let sf_right = norm_sf(beta / alpha.sqrt());
        if phi_beta <= 0.0 || sf_right <= 0.0 {
            return Err(Error::InvalidParameter(format!("beta = {beta} puts all mass in one half-line")));
        }
        let log_left = 0.5 * beta * beta + 0.5 * ln_2pi + phi_beta.ln();
        let log_right = beta * beta / (2.0 * alpha) + 0.5 * (ln_2pi - alpha.ln()) + sf_right.ln();
        let log_z = log_add(log_left, log_right);
        Ok(Self {
            alpha,
            beta,
            log_z,
            w_left: (log_left - log_z).exp(),
            phi_beta,
            sf_right,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Normalizing constant `Z`.
    pub fn z(&self) -> f64 {
        self.log_z.exp()
    }

    /// Probability of `x <= 0`.
    pub fn mass_left(&self) -> f64 {
        self.w_left
    }

    pub fn pdf(&self, x: f64) -> f64 {
        let curv = if x <= 0.0 { 1.0 } else { self.alpha };
        (-self.beta * x - 0.5 * curv * x * x - self.log_z).exp()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            self.w_left * norm_cdf(x + self.beta) / self.phi_beta
        } else {
            let sa = self.alpha.sqrt();
            let tail = norm_sf(sa * x + self.beta / sa) / self.sf_right;
            self.w_left + (1.0 - self.w_left) * (1.0 - tail)
        }
    }

    pub fn quantile(&self, u: f64) -> f64 {
        if u <= 0.0 {
            return f64::NEG_INFINITY;
        }
        if u >= 1.0 {
            return f64::INFINITY;
        }
        if u <= self.w_left {
            norm_quantile(u / self.w_left * self.phi_beta) - self.beta
        } else {
            let sa = self.alpha.sqrt();
            let tail = (1.0 - (u - self.w_left) / (1.0 - self.w_left)) * self.sf_right;
            (-norm_quantile(tail) - self.beta / sa) / sa
        }
    }

    pub fn sample(&self, rng: &mut SimRng) -> f64 {
        loop {
            let u: f64 = rng.random();
            if u > 0.0 {
                return self.quantile(u);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn alpha_one_is_normal() {
        let law = Exact1DInvariant::new(1.0, 1.0).unwrap();
        for x in [-3.0, -1.0, 0.0, 0.5, 2.0] {
            let want = (-(x + 1.0f64).powi(2) / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt();
            assert_abs_diff_eq!(law.pdf(x), want, epsilon = 1e-14);
            assert_abs_diff_eq!(law.cdf(x), norm_cdf(x + 1.0), epsilon = 1e-14);
        }
        let std = Exact1DInvariant::new(1.0, 0.0).unwrap();
        assert_abs_diff_eq!(std.quantile(0.5), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(std.mass_left(), 0.5, epsilon = 1e-14);
    }

    #[test]
    fn pdf_ratio_across_kink() {
        let law = Exact1DInvariant::new(0.5, 1.0).unwrap();
        assert_abs_diff_eq!(law.pdf(1.0) / law.pdf(-1.0), (-1.75f64).exp(), epsilon = 1e-14);
        assert_abs_diff_eq!(law.pdf(1e-12), law.pdf(-1e-12), epsilon = 1e-10);
        assert!(matches!(Exact1DInvariant::new(0.0, 1.0), Err(Error::BadAlpha(_))));
    }

    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for k in 1..n {
            let w = if k % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f(a + k as f64 * h);
        }
        s * h / 3.0
    }

    #[test]
    fn normalization_and_inverse() {
        for (alpha, beta) in [(0.5, 1.0), (2.0, -0.5), (1.0, 0.0), (0.2, 2.0)] {
            let law = Exact1DInvariant::new(alpha, beta).unwrap();
            let a = -40.0;
            let total = simpson(|x| law.pdf(x), a, 0.0, 200_000) + simpson(|x| law.pdf(x), 0.0, 40.0, 200_000);
            assert_abs_diff_eq!(total, 1.0, epsilon = 1e-8);
            for k in 1..=999 {
                let u = k as f64 / 1000.0;
                assert_abs_diff_eq!(law.cdf(law.quantile(u)), u, epsilon = 1e-6);
            }
            // CDF is the integral of the pdf; split at the kink.
            let x1 = 0.7;
            let left = simpson(|x| law.pdf(x), a, 0.0, 20_000);
            let right = simpson(|x| law.pdf(x), 0.0, x1, 2_000);
            assert_abs_diff_eq!(left, law.mass_left(), epsilon = 1e-8);
            assert_abs_diff_eq!(left + right, law.cdf(x1), epsilon = 1e-8);
        }
    }
}
