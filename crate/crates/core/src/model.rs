//! Phase-type service primitives and the coefficients of the limiting
//! diffusion `dX = g(X) dt + sigma dB` of the M/Ph/n+M queue, where
//!
//! ```text
//! g(x) = -beta p - R x + (R - alpha I) p (e'x)^+
//! R    = (I - P') diag(v)
//! ```

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

const PROB_TOL: f64 = 1e-12;
const ROUTING_TOL: f64 = 1e-12;

/// Phase-type service law: initial phase `p`, sub-stochastic routing `P`
/// between phases and per-phase completion rates `v`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseTypeService {
    p: DVector<f64>,
    routing: DMatrix<f64>,
    rates: DVector<f64>,
    r: DMatrix<f64>,
    r_inv_p: DVector<f64>,
}

impl PhaseTypeService {
    /// Validates `(p, P, v)` and assembles `R = (I - P') diag(v)`.
    pub fn new(p: &[f64], routing: &[Vec<f64>], rates: &[f64]) -> Result<Self> {
        let d = p.len();
        if d == 0 {
            return Err(Error::DimensionMismatch("phase count must be at least 1".into()));
        }
        if routing.len() != d || routing.iter().any(|row| row.len() != d) {
            return Err(Error::DimensionMismatch(format!("routing matrix must be {d}x{d}")));
        }
        if rates.len() != d {
            return Err(Error::DimensionMismatch(format!("rate vector must have length {d}")));
        }
        let all_finite = p.iter().chain(rates).chain(routing.iter().flatten()).all(|x| x.is_finite());
        if !all_finite {
            return Err(Error::InvalidParameter("phase-type entries must be finite".into()));
        }

        if let Some(i) = p.iter().position(|&x| x < 0.0) {
            return Err(Error::NonStochastic(format!("p[{}] = {} is negative", i + 1, p[i])));
        }
        let total: f64 = p.iter().sum();
        if (total - 1.0).abs() > PROB_TOL {
            return Err(Error::NonStochastic(format!("entries sum to {total}, expected 1")));
        }

        for (i, row) in routing.iter().enumerate() {
            if row[i] != 0.0 {
                return Err(Error::BadRouting(format!("P[{0}][{0}] = {1} must be 0", i + 1, row[i])));
            }
            if let Some(j) = row.iter().position(|&x| x < 0.0) {
                return Err(Error::BadRouting(format!("P[{}][{}] = {} is negative", i + 1, j + 1, row[j])));
            }
            let s: f64 = row.iter().sum();
            if s > 1.0 + ROUTING_TOL {
                return Err(Error::BadRouting(format!("row {} sums to {s} > 1", i + 1)));
            }
        }

        if let Some(i) = rates.iter().position(|&x| x <= 0.0) {
            return Err(Error::BadRates(format!("v[{}] = {} must be positive", i + 1, rates[i])));
        }

        let routing = DMatrix::from_fn(d, d, |i, j| routing[i][j]);
        let eye = DMatrix::<f64>::identity(d, d);
        let i_minus_p = &eye - &routing;
        let sv = i_minus_p.singular_values();
        if sv.min() <= 1e-12 * sv.max().max(1.0) {
            return Err(Error::Singular("I - P is not invertible".into()));
        }

        let p = DVector::from_column_slice(p);
        let rates = DVector::from_column_slice(rates);
        let r = i_minus_p.transpose() * DMatrix::from_diagonal(&rates);
        let r_inv_p = r
            .clone()
            .lu()
            .solve(&p)
            .ok_or_else(|| Error::Singular("R is not invertible".into()))?;
        Ok(Self {
            p,
            routing,
            rates,
            r,
            r_inv_p,
        })
    }

    pub fn dim(&self) -> usize {
        self.p.len()
    }

    pub fn p(&self) -> &DVector<f64> {
        &self.p
    }

    pub fn routing(&self) -> &DMatrix<f64> {
        &self.routing
    }

    pub fn rates(&self) -> &DVector<f64> {
        &self.rates
    }

    /// `R = (I - P') diag(v)`.
    pub fn r(&self) -> &DMatrix<f64> {
        &self.r
    }

    /// Mean service time `e' R^{-1} p`.
    pub fn mean(&self) -> f64 {
        self.r_inv_p.sum()
    }

    /// `zeta = 1 / (e' R^{-1} p)`.
    pub fn zeta(&self) -> f64 {
        1.0 / self.mean()
    }

    /// `gamma = zeta R^{-1} p`; sums to one.
    pub fn gamma(&self) -> DVector<f64> {
        &self.r_inv_p * self.zeta()
    }

    pub fn is_mean_one(&self) -> bool {
        (self.mean() - 1.0).abs() <= 1e-10
    }

    /// Rescales every rate by the current mean so the service time has
    /// mean one. `p` and `P` are untouched.
    pub fn normalize_mean(&self) -> Result<Self> {
        if self.is_mean_one() {
            return Ok(self.clone());
        }
        let scale = self.mean();
        let rates: Vec<f64> = self.rates.iter().map(|v| v * scale).collect();
        let rows: Vec<Vec<f64>> = self.routing.row_iter().map(|r| r.iter().copied().collect()).collect();
        Self::new(self.p.as_slice(), &rows, &rates)
    }

    /// `H^(k)` for 1-based phase `k`: `H_ii = P_ki (1 - P_ki)`, `H_ij = -P_ki P_kj`.
    pub fn routing_fluctuation(&self, k: usize) -> Result<DMatrix<f64>> {
        let d = self.dim();
        if k == 0 || k > d {
            return Err(Error::IndexOutOfRange { index: k, dim: d });
        }
        let row = self.routing.row(k - 1);
        Ok(DMatrix::from_fn(d, d, |i, j| {
            if i == j {
                row[i] * (1.0 - row[i])
            } else {
                -row[i] * row[j]
            }
        }))
    }

    /// `sigma sigma' = diag(p) + sum_k gamma_k v_k H^(k) + (I - P') diag(v) diag(gamma) (I - P)`.
    pub fn covariance(&self) -> Result<DMatrix<f64>> {
        let d = self.dim();
        let gamma = self.gamma();
        let mut cov = DMatrix::from_diagonal(&self.p);
        for k in 0..d {
            let h = self.routing_fluctuation(k + 1)?;
            cov += h * (gamma[k] * self.rates[k]);
        }
        let eye = DMatrix::<f64>::identity(d, d);
        cov += &self.r * DMatrix::from_diagonal(&gamma) * (&eye - &self.routing);
        let cov = linalg::symmetrize(&cov);
        let min_eig = linalg::lambda_min(&cov);
        if !(min_eig > 0.0) {
            return Err(Error::NotPositiveDefinite { min_eigenvalue: min_eig });
        }
        Ok(cov)
    }
}

/// Piecewise smoothing of `y -> y^+` used by the regularized drift.
pub fn rho_eps(y: f64, eps: f64) -> f64 {
    if y < -eps {
        0.0
    } else if y > eps {
        y
    } else {
        3.0 * eps / 16.0 - y.powi(4) / (16.0 * eps.powi(3)) + 3.0 * y * y / (8.0 * eps) + 0.5 * y
    }
}

/// All coefficients of the limiting diffusion, plus the operator-norm
/// constants used by the error bounds.
#[derive(Debug, Clone)]
pub struct DiffusionModel {
    pt: PhaseTypeService,
    alpha: f64,
    beta: f64,
    gamma: DVector<f64>,
    sigma_sq: DMatrix<f64>,
    sigma: DMatrix<f64>,
    c_ellip: f64,
    c_op: f64,
    c_op_tilde: f64,
    // Hot-path copies, row-major.
    r_flat: Vec<f64>,
    sigma_flat: Vec<f64>,
    kink: Vec<f64>,
    beta_p: Vec<f64>,
}

impl DiffusionModel {
    /// Builds the model from a service law; the service is first rescaled
    /// to mean one.
    pub fn new(pt: &PhaseTypeService, alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(Error::BadAlpha(alpha));
        }
        if !beta.is_finite() {
            return Err(Error::InvalidParameter(format!("beta must be finite, got {beta}")));
        }
        let pt = pt.normalize_mean()?;
        let d = pt.dim();
        let gamma = pt.gamma();
        let sigma_sq = pt.covariance()?;
        let sigma = linalg::cholesky_lower(&sigma_sq)?;
        let c_ellip = linalg::lambda_min(&sigma_sq);

        let r = pt.r().clone();
        let r_minus_alpha = &r - DMatrix::<f64>::identity(d, d) * alpha;
        let kink_vec = &r_minus_alpha * pt.p();
        let kink_outer = &kink_vec * DVector::<f64>::from_element(d, 1.0).transpose();
        let c_op = linalg::op_norm(&r) + linalg::op_norm(&kink_outer);
        let c_op_tilde = c_op + linalg::hs_norm(&sigma_sq) + 1.0 + linalg::op_norm(&r_minus_alpha) + beta.abs();

        let r_flat = (0..d * d).map(|k| r[(k / d, k % d)]).collect();
        let sigma_flat = (0..d * d).map(|k| sigma[(k / d, k % d)]).collect();
        let beta_p = pt.p().iter().map(|pi| beta * pi).collect();
        Ok(Self {
            alpha,
            beta,
            gamma,
            sigma_sq,
            sigma,
            c_ellip,
            c_op,
            c_op_tilde,
            r_flat,
            sigma_flat,
            kink: kink_vec.iter().copied().collect(),
            beta_p,
            pt,
        })
    }

    pub fn from_spec(spec: &ModelSpec) -> Result<Self> {
        let pt = PhaseTypeService::new(&spec.p, &spec.routing, &spec.v)?;
        Self::new(&pt, spec.alpha, spec.beta)
    }

    pub fn dim(&self) -> usize {
        self.pt.dim()
    }
    pub fn phase_type(&self) -> &PhaseTypeService {
        &self.pt
    }
    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    pub fn beta(&self) -> f64 {
        self.beta
    }
    pub fn r(&self) -> &DMatrix<f64> {
        self.pt.r()
    }
    pub fn p(&self) -> &DVector<f64> {
        self.pt.p()
    }
    pub fn gamma(&self) -> &DVector<f64> {
        &self.gamma
    }
    /// `sigma sigma'`.
    pub fn sigma_sq(&self) -> &DMatrix<f64> {
        &self.sigma_sq
    }
    /// Lower-triangular Cholesky factor of `sigma sigma'`.
    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }
    /// Smallest eigenvalue of `sigma sigma'`.
    pub fn c_ellip(&self) -> f64 {
        self.c_ellip
    }
    /// `||R||_op + ||(R - alpha I) p e'||_op`, the Lipschitz constant of `g`.
    pub fn c_op(&self) -> f64 {
        self.c_op
    }
    /// Linear-growth constant: `||g(x)|| <= c_op_tilde (1 + ||x||)`.
    pub fn c_op_tilde(&self) -> f64 {
        self.c_op_tilde
    }
    /// Moment constant `2 m^2 c_op_tilde`.
    pub fn c_m(&self, m: u32) -> f64 {
        2.0 * (m as f64).powi(2) * self.c_op_tilde
    }
    /// `(R - alpha I) p`.
    pub fn kink_direction(&self) -> &[f64] {
        &self.kink
    }

    /// Writes `g(x)` into `out`.
    #[inline]
    pub fn drift_into(&self, x: &[f64], out: &mut [f64]) {
        self.affine_part_into(x, out);
        let s: f64 = x.iter().sum();
        if s > 0.0 {
            for (o, k) in out.iter_mut().zip(&self.kink) {
                *o += k * s;
            }
        }
    }

    #[inline]
    fn affine_part_into(&self, x: &[f64], out: &mut [f64]) {
        let d = x.len();
        for (i, o) in out.iter_mut().enumerate().take(d) {
            let row = &self.r_flat[i * d..(i + 1) * d];
            let rx: f64 = row.iter().zip(x).map(|(a, b)| a * b).sum();
            *o = -self.beta_p[i] - rx;
        }
    }

    pub fn drift(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        self.drift_into(x, &mut out);
        out
    }

    /// Smoothed drift `g_eps(x) = -beta p - R x + rho_eps(e'x) (R - alpha I) p`.
    pub fn smoothed_drift(&self, x: &[f64], eps: f64) -> Result<Vec<f64>> {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::BadEpsilon(eps));
        }
        self.check_dim(x.len())?;
        let mut out = vec![0.0; x.len()];
        self.affine_part_into(x, &mut out);
        let w = rho_eps(x.iter().sum(), eps);
        for (o, k) in out.iter_mut().zip(&self.kink) {
            *o += k * w;
        }
        Ok(out)
    }

    /// Adds `sigma xi` (lower-triangular product) into `out`, scaled by `scale`.
    #[inline]
    pub fn add_noise(&self, xi: &[f64], scale: f64, out: &mut [f64]) {
        let d = xi.len();
        for (i, o) in out.iter_mut().enumerate().take(d) {
            let row = &self.sigma_flat[i * d..i * d + i + 1];
            let s: f64 = row.iter().zip(xi).map(|(a, b)| a * b).sum();
            *o += scale * s;
        }
    }

    /// Generator `Af(x) = <grad f(x), g(x)> + 1/2 <sigma sigma', hess f(x)>_HS`.
    pub fn generator_apply(&self, grad: &[f64], hess: &DMatrix<f64>, x: &[f64]) -> Result<f64> {
        let d = self.dim();
        self.check_dim(x.len())?;
        self.check_dim(grad.len())?;
        if hess.shape() != (d, d) {
            return Err(Error::DimensionMismatch(format!("hessian must be {d}x{d}")));
        }
        let g = self.drift(x);
        let first: f64 = grad.iter().zip(&g).map(|(a, b)| a * b).sum();
        let second = self.sigma_sq.component_mul(hess).sum();
        Ok(first + 0.5 * second)
    }

    pub(crate) fn check_dim(&self, len: usize) -> Result<()> {
        if len != self.dim() {
            return Err(Error::DimensionMismatch(format!("expected length {}, got {len}", self.dim())));
        }
        Ok(())
    }

    /// True when the two models share every primitive.
    pub fn same_parameters(&self, other: &DiffusionModel) -> bool {
        self.alpha == other.alpha && self.beta == other.beta && self.pt == other.pt
    }
}

/// JSON form of a model: `{"p": [...], "P": [[...]], "v": [...], "alpha": .., "beta": ..}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub p: Vec<f64>,
    #[serde(rename = "P")]
    pub routing: Vec<Vec<f64>>,
    pub v: Vec<f64>,
    pub alpha: f64,
    pub beta: f64,
}

impl ModelSpec {
    /// Exponential service, one phase.
    pub fn exponential(alpha: f64, beta: f64) -> Self {
        Self {
            p: vec![1.0],
            routing: vec![vec![0.0]],
            v: vec![1.0],
            alpha,
            beta,
        }
    }

    /// Erlang-2 service with mean one.
    pub fn erlang2(alpha: f64, beta: f64) -> Self {
        Self {
            p: vec![1.0, 0.0],
            routing: vec![vec![0.0, 1.0], vec![0.0, 0.0]],
            v: vec![2.0, 2.0],
            alpha,
            beta,
        }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn build(&self) -> Result<DiffusionModel> {
        DiffusionModel::from_spec(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn erlang2() -> PhaseTypeService {
        PhaseTypeService::new(&[1.0, 0.0], &[vec![0.0, 1.0], vec![0.0, 0.0]], &[2.0, 2.0]).unwrap()
    }

    #[test]
    fn exponential_service() {
        let pt = PhaseTypeService::new(&[1.0], &[vec![0.0]], &[1.0]).unwrap();
        assert_abs_diff_eq!(pt.zeta(), 1.0);
        assert_abs_diff_eq!(pt.gamma()[0], 1.0);
    }

    #[test]
    fn erlang2_primitives() {
        let pt = erlang2();
        let r = pt.r();
        assert_eq!(r.as_slice(), DMatrix::from_row_slice(2, 2, &[2.0, 0.0, -2.0, 2.0]).as_slice());
        assert_abs_diff_eq!(pt.gamma()[0], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(pt.gamma()[1], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(pt.zeta(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn routing_errors() {
        let e = PhaseTypeService::new(&[1.0, 0.0], &[vec![0.5, 1.0], vec![0.0, 0.0]], &[1.0, 1.0]).unwrap_err();
        assert!(matches!(e, Error::BadRouting(_)));
        let e = PhaseTypeService::new(&[1.0, 0.0], &[vec![0.0, -0.1], vec![0.0, 0.0]], &[1.0, 1.0]).unwrap_err();
        assert!(matches!(e, Error::BadRouting(_)));
        let e = PhaseTypeService::new(&[1.0, 0.0], &[vec![0.0, 0.7], vec![0.6, 0.0]], &[1.0, 1.0]);
        assert!(e.is_ok());
        let e = PhaseTypeService::new(&[1.0, 0.0], &[vec![0.0, 0.7, 0.4], vec![0.0, 0.0]], &[1.0, 1.0]).unwrap_err();
        assert!(matches!(e, Error::DimensionMismatch(_)));
        let e = PhaseTypeService::new(&[1.0, 0.0], &[vec![0.0, 0.6], vec![0.6, 0.0]], &[1.0, 1.0]);
        assert!(e.is_ok());
    }

    #[test]
    fn singular_routing() {
        // Closed loop between two phases never absorbs.
        let e = PhaseTypeService::new(&[1.0, 0.0], &[vec![0.0, 1.0], vec![1.0, 0.0]], &[1.0, 1.0]).unwrap_err();
        assert!(matches!(e, Error::Singular(_)));
    }

    #[test]
    fn bad_p_and_rates() {
        let e = PhaseTypeService::new(&[0.7, 0.2], &[vec![0.0, 0.0], vec![0.0, 0.0]], &[1.0, 1.0]).unwrap_err();
        assert!(matches!(e, Error::NonStochastic(_)));
        let e = PhaseTypeService::new(&[1.2, -0.2], &[vec![0.0, 0.0], vec![0.0, 0.0]], &[1.0, 1.0]).unwrap_err();
        assert!(matches!(e, Error::NonStochastic(_)));
        let e = PhaseTypeService::new(&[1.0], &[vec![0.0]], &[0.0]).unwrap_err();
        assert!(matches!(e, Error::BadRates(_)));
    }

    #[test]
    fn normalize_mean_rescales_rates() {
        let pt = PhaseTypeService::new(&[1.0], &[vec![0.0]], &[2.0]).unwrap();
        let n = pt.normalize_mean().unwrap();
        assert_abs_diff_eq!(n.rates()[0], 1.0, epsilon = 1e-15);

        let fast = PhaseTypeService::new(&[1.0, 0.0], &[vec![0.0, 1.0], vec![0.0, 0.0]], &[4.0, 4.0]).unwrap();
        let n = fast.normalize_mean().unwrap();
        assert_abs_diff_eq!(n.rates()[0], 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(n.rates()[1], 2.0, epsilon = 1e-14);
        assert!((n.mean() - 1.0).abs() < 1e-10);

        let e2 = erlang2();
        assert_eq!(e2.normalize_mean().unwrap(), e2);
        assert_eq!(n.normalize_mean().unwrap(), n);
    }

    #[test]
    fn routing_fluctuation_examples() {
        let h = erlang2().routing_fluctuation(1).unwrap();
        assert_eq!(h.amax(), 0.0);
        let h = erlang2().routing_fluctuation(2).unwrap();
        assert_eq!(h.amax(), 0.0);
        assert!(matches!(erlang2().routing_fluctuation(3), Err(Error::IndexOutOfRange { .. })));
        assert!(matches!(erlang2().routing_fluctuation(0), Err(Error::IndexOutOfRange { .. })));

        let pt = PhaseTypeService::new(
            &[1.0, 0.0, 0.0],
            &[vec![0.0, 0.5, 0.5], vec![0.0, 0.0, 0.0], vec![0.0, 0.0, 0.0]],
            &[1.0, 1.0, 1.0],
        )
        .unwrap();
        let h = pt.routing_fluctuation(1).unwrap();
        assert_abs_diff_eq!(h[(1, 1)], 0.25);
        assert_abs_diff_eq!(h[(2, 2)], 0.25);
        assert_abs_diff_eq!(h[(1, 2)], -0.25);
        assert_abs_diff_eq!(h[(0, 0)], 0.0);
    }

    #[test]
    fn covariance_examples() {
        let exp = PhaseTypeService::new(&[1.0], &[vec![0.0]], &[1.0]).unwrap();
        assert_abs_diff_eq!(exp.covariance().unwrap()[(0, 0)], 2.0, epsilon = 1e-15);

        let c = erlang2().covariance().unwrap();
        let want = DMatrix::from_row_slice(2, 2, &[2.0, -1.0, -1.0, 2.0]);
        assert!((&c - &want).amax() <= 1e-12);
        let ev = linalg::sym_eigenvalues(&c);
        assert_abs_diff_eq!(ev[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(ev[1], 3.0, epsilon = 1e-12);
    }

    #[test]
    fn build_model_examples() {
        let m = ModelSpec::exponential(0.5, 1.0).build().unwrap();
        assert_abs_diff_eq!(m.sigma()[(0, 0)], 2f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(m.c_ellip(), 2.0, epsilon = 1e-12);

        let m = ModelSpec::erlang2(0.5, 1.0).build().unwrap();
        let s = m.sigma();
        assert_abs_diff_eq!(s[(0, 0)], 2f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(s[(0, 1)], 0.0);
        assert_abs_diff_eq!(s[(1, 0)], -0.5f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(s[(1, 1)], 1.22474, epsilon = 1e-5);
        assert!((s * s.transpose() - m.sigma_sq()).amax() < 1e-10);
        assert!(linalg::asymmetry(m.sigma_sq()) <= 1e-12);

        assert!(matches!(ModelSpec::exponential(0.0, 1.0).build(), Err(Error::BadAlpha(_))));
    }

    #[test]
    fn constants() {
        let m = ModelSpec::exponential(0.5, 1.0).build().unwrap();
        // ||R|| = 1, ||(R - alpha) p e'|| = 0.5
        assert_abs_diff_eq!(m.c_op(), 1.5, epsilon = 1e-12);
        // 1.5 + 2 + 1 + 0.5 + 1
        assert_abs_diff_eq!(m.c_op_tilde(), 6.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m.c_m(2), 48.0, epsilon = 1e-10);
    }

    #[test]
    fn drift_examples() {
        let m = ModelSpec::exponential(0.5, 1.0).build().unwrap();
        assert_eq!(m.drift(&[0.0]), vec![-1.0]);
        assert_abs_diff_eq!(m.drift(&[2.0])[0], -2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(m.drift(&[-1.0])[0], 0.0, epsilon = 1e-15);

        let m = ModelSpec::erlang2(0.5, 1.0).build().unwrap();
        let g = m.drift(&[1.0, 1.0]);
        assert_abs_diff_eq!(g[0], 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(g[1], -4.0, epsilon = 1e-14);
        let g = m.drift(&[-1.0, -1.0]);
        assert_abs_diff_eq!(g[0], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(g[1], 0.0, epsilon = 1e-14);
    }

    #[test]
    fn rho_eps_examples() {
        let eps = 0.3;
        assert_abs_diff_eq!(rho_eps(eps, eps), eps, epsilon = 1e-15);
        assert_abs_diff_eq!(rho_eps(-eps, eps), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(rho_eps(0.0, eps), 3.0 * eps / 16.0, epsilon = 1e-15);

        let m = ModelSpec::erlang2(0.5, 1.0).build().unwrap();
        let x = [0.3, -0.1];
        let g = m.drift(&x);
        let ge = m.smoothed_drift(&x, 1e-3).unwrap();
        assert!(g.iter().zip(&ge).all(|(a, b)| (a - b).abs() < 1e-14));
        assert!(matches!(m.smoothed_drift(&x, 1.0), Err(Error::BadEpsilon(_))));
        assert!(matches!(m.smoothed_drift(&x, 0.0), Err(Error::BadEpsilon(_))));
    }

    #[test]
    fn generator_examples() {
        let m = ModelSpec::exponential(0.5, 1.0).build().unwrap();
        let zero = DMatrix::zeros(1, 1);
        // f(y) = 3 y
        let af = m.generator_apply(&[3.0], &zero, &[2.0]).unwrap();
        assert_abs_diff_eq!(af, 3.0 * m.drift(&[2.0])[0]);
        // f(y) = y^2 at 0
        let af = m.generator_apply(&[0.0], &DMatrix::from_element(1, 1, 2.0), &[0.0]).unwrap();
        assert_abs_diff_eq!(af, 2.0, epsilon = 1e-14);
        // constant
        assert_eq!(m.generator_apply(&[0.0], &zero, &[5.0]).unwrap(), 0.0);
        assert!(matches!(
            m.generator_apply(&[0.0, 1.0], &zero, &[5.0]),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn json_roundtrip() {
        let s = r#"{"p":[1,0],"P":[[0,1],[0,0]],"v":[2,2],"alpha":0.5,"beta":1}"#;
        let spec = ModelSpec::from_json(s).unwrap();
        assert_eq!(spec, ModelSpec::erlang2(0.5, 1.0));
    }
}
