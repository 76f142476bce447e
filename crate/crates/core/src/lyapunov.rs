//! Lyapunov function
//!
//! ```text
//! V(y) = (e'y)^2 + kappa [y - p phi(e'y)]' Q [y - p phi(e'y)] + c_hat2
//! ```
//!
//! together with a constructive choice of `Q` and numerical audits of the
//! drift condition `AV <= -c1 V + c1_breve` and of the resulting moment bound.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::em::Trajectory;
use crate::error::{Error, Result};
use crate::linalg;
use crate::model::DiffusionModel;
use crate::seed::{self, SeedRole};

/// `phi(z)`: identity on `z >= 0`, `-1/2` below `-1`, quartic blend between.
pub fn phi(z: f64) -> f64 {
    if z >= 0.0 {
        z
    } else if z <= -1.0 {
        -0.5
    } else {
        -0.5 * z.powi(4) - z.powi(3) + z
    }
}

pub fn phi_dot(z: f64) -> f64 {
    if z >= 0.0 {
        1.0
    } else if z <= -1.0 {
        0.0
    } else {
        -2.0 * z.powi(3) - 3.0 * z * z + 1.0
    }
}

pub fn phi_ddot(z: f64) -> f64 {
    if z >= 0.0 || z <= -1.0 {
        0.0
    } else {
        -6.0 * z * z - 6.0 * z
    }
}

/// Drift constants fitted on a grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftConstants {
    pub c1: f64,
    pub c1_breve: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovSpec {
    pub q_tilde: DMatrix<f64>,
    pub kappa: f64,
    pub c_hat2: f64,
    pub fitted: Option<DriftConstants>,
}

impl LyapunovSpec {
    pub fn new(q_tilde: DMatrix<f64>, kappa: f64, c_hat2: f64) -> Result<Self> {
        if !(kappa >= 0.0 && kappa.is_finite()) {
            return Err(Error::InvalidParameter(format!("kappa must be >= 0, got {kappa}")));
        }
        if !(c_hat2 >= 0.0 && c_hat2.is_finite()) {
            return Err(Error::InvalidParameter(format!("c_hat2 must be >= 0, got {c_hat2}")));
        }
        if linalg::asymmetry(&q_tilde) > 1e-12 {
            return Err(Error::InvalidParameter("Q must be symmetric".into()));
        }
        let min_eig = linalg::lambda_min(&q_tilde);
        if !(min_eig > 0.0) {
            return Err(Error::NotPositiveDefinite { min_eigenvalue: min_eig });
        }
        Ok(Self {
            q_tilde,
            kappa,
            c_hat2,
            fitted: None,
        })
    }
}

/// `Q` together with the largest eigenvalues of both matrix inequalities.
#[derive(Debug, Clone, PartialEq)]
pub struct QTilde {
    pub q: DMatrix<f64>,
    /// `lambda_max(Q(-R) + (-R)'Q)`, must be negative.
    pub ineq1: f64,
    /// `lambda_max(Q M + M'Q)` with `M = -(I - p e')R`, must be `<= 1e-10`.
    pub ineq2: f64,
    /// True when the plain Lyapunov solution failed and the search ran.
    pub searched: bool,
}

pub const INEQ2_TOL: f64 = 1e-10;

fn ineq_matrices(r: &DMatrix<f64>, p: &DVector<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let d = r.nrows();
    let a = -r;
    let e = DVector::<f64>::from_element(d, 1.0);
    let m = -(DMatrix::<f64>::identity(d, d) - p * e.transpose()) * r;
    (a, m)
}

fn sym_form(q: &DMatrix<f64>, a: &DMatrix<f64>) -> DMatrix<f64> {
    q * a + a.transpose() * q
}

fn normalize_abs(q: &DMatrix<f64>) -> DMatrix<f64> {
    q / q.iter().map(|v| v.abs()).sum::<f64>()
}

/// Largest eigenvalues of the two inequalities at `q`.
pub fn matrix_inequalities(q: &DMatrix<f64>, r: &DMatrix<f64>, p: &DVector<f64>) -> (f64, f64) {
    let (a, m) = ineq_matrices(r, p);
    (linalg::lambda_max(&sym_form(q, &a)), linalg::lambda_max(&sym_form(q, &m)))
}

/// Solves `Q(-R) + (-R)'Q = -I`, normalizes `sum |Q_ij| = 1` and checks both
/// inequalities. When the second fails, a subgradient search over the
/// matrices compatible with it runs before giving up.
pub fn solve_q_tilde(r: &DMatrix<f64>, p: &DVector<f64>) -> Result<QTilde> {
    let d = r.nrows();
    if r.ncols() != d || p.len() != d {
        return Err(Error::DimensionMismatch("R must be square and match p".into()));
    }
    let (a, _) = ineq_matrices(r, p);
    if !linalg::is_hurwitz(&a) {
        return Err(Error::NotHurwitz("-R has an eigenvalue with nonnegative real part".into()));
    }
    let q0 = normalize_abs(&linalg::solve_lyapunov(&a, &(-DMatrix::<f64>::identity(d, d)))?);
    let (i1, i2) = matrix_inequalities(&q0, r, p);
    if i1 < 0.0 && i2 <= INEQ2_TOL {
        return Ok(QTilde {
            q: q0,
            ineq1: i1,
            ineq2: i2,
            searched: false,
        });
    }
    let q = search_q(r, p, &q0);
    let (i1, i2) = matrix_inequalities(&q, r, p);
    if i1 < 0.0 && i2 <= INEQ2_TOL && linalg::lambda_min(&q) > 0.0 {
        Ok(QTilde {
            q,
            ineq1: i1,
            ineq2: i2,
            searched: true,
        })
    } else {
        Err(Error::Inequality2Violated { max_eigenvalue: i2 })
    }
}

/// Any `Q` with `QM + M'Q <= 0` must satisfy `Q R^{-1} p ∝ e`, because
/// `M R^{-1} p = 0` while `ker M' = span(e)`. The search therefore works in
/// that linear subspace of symmetric matrices and minimizes the convex
/// function `max(lambda_max(S1), -lambda_min(Q), lambda_max(S2 on u^perp))`.
fn search_q(r: &DMatrix<f64>, p: &DVector<f64>, start: &DMatrix<f64>) -> DMatrix<f64> {
    let d = r.nrows();
    let (a, m) = ineq_matrices(r, p);
    let u = match r.clone().lu().solve(p) {
        Some(u) => u,
        None => return start.clone(),
    };

    // Symmetric basis E_ij with unit Frobenius norm.
    let mut sym_basis = Vec::new();
    for i in 0..d {
        for j in i..d {
            let mut b = DMatrix::<f64>::zeros(d, d);
            if i == j {
                b[(i, i)] = 1.0;
            } else {
                b[(i, j)] = std::f64::consts::FRAC_1_SQRT_2;
                b[(j, i)] = std::f64::consts::FRAC_1_SQRT_2;
            }
            sym_basis.push(b);
        }
    }
    // Constraints (Qu)_i - (Qu)_0 = 0 for i >= 1.
    let nb = sym_basis.len();
    let cons = DMatrix::from_fn(d.saturating_sub(1), nb, |row, k| {
        let qu = &sym_basis[k] * &u;
        qu[row + 1] - qu[0]
    });
    let ns = linalg::null_space(&cons, 1e-10);
    if ns.ncols() == 0 {
        return start.clone();
    }
    let basis: Vec<DMatrix<f64>> = (0..ns.ncols())
        .map(|c| {
            let mut b = DMatrix::<f64>::zeros(d, d);
            for k in 0..nb {
                b += &sym_basis[k] * ns[(k, c)];
            }
            b
        })
        .collect();
    let to_q = |c: &DVector<f64>| -> DMatrix<f64> {
        let mut q = DMatrix::<f64>::zeros(d, d);
        for (k, b) in basis.iter().enumerate() {
            q += b * c[k];
        }
        q
    };
    let coords = |g: &DMatrix<f64>| DVector::from_iterator(basis.len(), basis.iter().map(|b| b.dot(g)));

    // Orthonormal basis of u^perp for the restricted second inequality.
    let u_perp = linalg::null_space(&DMatrix::from_row_slice(1, d, u.as_slice()), 1e-12);

    let objective = |q: &DMatrix<f64>| -> (f64, DMatrix<f64>) {
        let (l1, v1) = linalg::top_eigenpair(&sym_form(q, &a));
        let (lq, vq) = linalg::top_eigenpair(&(-q));
        let mut best = (l1, {
            let av = &a * &v1;
            &v1 * av.transpose() + &av * v1.transpose()
        });
        if lq > best.0 {
            best = (lq, -(&vq * vq.transpose()));
        }
        if u_perp.ncols() > 0 {
            let s2 = u_perp.transpose() * sym_form(q, &m) * &u_perp;
            let (l2, w) = linalg::top_eigenpair(&s2);
            if l2 > best.0 {
                let v2 = &u_perp * w;
                let mv = &m * &v2;
                best = (l2, &v2 * mv.transpose() + &mv * v2.transpose());
            }
        }
        best
    };

    let mut c = coords(start);
    if c.norm() == 0.0 {
        c = DVector::from_element(basis.len(), 1.0);
    }
    c /= c.norm();
    let mut best_c = c.clone();
    let mut best_f = objective(&to_q(&c)).0;
    for k in 0..20_000 {
        let (f, grad) = objective(&to_q(&c));
        if f < best_f {
            best_f = f;
            best_c = c.clone();
        }
        if best_f < -1e-9 {
            break;
        }
        let g = coords(&grad);
        let gn = g.norm();
        if gn == 0.0 {
            break;
        }
        c -= g * (0.5 / ((k + 1) as f64).sqrt() / gn);
        c /= c.norm();
    }
    normalize_abs(&linalg::symmetrize(&to_q(&best_c)))
}

/// `V`, its gradient and Hessian at `y`.
pub fn lyapunov_value(model: &DiffusionModel, spec: &LyapunovSpec, y: &[f64]) -> f64 {
    let (s, w) = shifted(model, y);
    s * s + spec.kappa * w.dot(&(&spec.q_tilde * &w)) + spec.c_hat2
}

fn shifted(model: &DiffusionModel, y: &[f64]) -> (f64, DVector<f64>) {
    let s: f64 = y.iter().sum();
    let w = DVector::from_column_slice(y) - model.p() * phi(s);
    (s, w)
}

/// `grad V = 2 (e'y) e + 2 kappa (I - e p' phi'(e'y)) Q w`, `w = y - p phi(e'y)`.
pub fn lyapunov_gradient(model: &DiffusionModel, spec: &LyapunovSpec, y: &[f64]) -> DVector<f64> {
    let d = y.len();
    let (s, w) = shifted(model, y);
    let qw = &spec.q_tilde * &w;
    let pqw = model.p().dot(&qw);
    let e = DVector::<f64>::from_element(d, 1.0);
    &e * (2.0 * s) + (qw - &e * (phi_dot(s) * pqw)) * (2.0 * spec.kappa)
}

/// `hess V = 2 e e' + 2 kappa (J'QJ - phi''(e'y) (p'Qw) e e')`, `J = I - p e' phi'(e'y)`.
pub fn lyapunov_hessian(model: &DiffusionModel, spec: &LyapunovSpec, y: &[f64]) -> DMatrix<f64> {
    let d = y.len();
    let (s, w) = shifted(model, y);
    let e = DVector::<f64>::from_element(d, 1.0);
    let ee = &e * e.transpose();
    let j = DMatrix::<f64>::identity(d, d) - model.p() * e.transpose() * phi_dot(s);
    let pqw = model.p().dot(&(&spec.q_tilde * &w));
    let inner = j.transpose() * &spec.q_tilde * &j - &ee * (phi_ddot(s) * pqw);
    &ee * 2.0 + inner * (2.0 * spec.kappa)
}

/// `AV(y)` through the model generator.
pub fn generator_of_v(model: &DiffusionModel, spec: &LyapunovSpec, y: &[f64]) -> f64 {
    let grad = lyapunov_gradient(model, spec, y);
    let hess = lyapunov_hessian(model, spec, y);
    model
        .generator_apply(grad.as_slice(), &hess, y)
        .expect("dimensions agree by construction")
}

/// Grid of `n` points in the ball of given radius: axis rays in both
/// directions (and along `e`), the rest uniform in the ball.
pub fn default_grid(dim: usize, n: usize, radius: f64, seed_value: u64) -> Vec<Vec<f64>> {
    use rand::Rng;
    use rand_distr::StandardNormal;
    let mut grid = vec![vec![0.0; dim]];
    let rays_per_dir = 50usize;
    let mut dirs: Vec<Vec<f64>> = Vec::new();
    for i in 0..dim {
        for sign in [1.0, -1.0] {
            let mut u = vec![0.0; dim];
            u[i] = sign;
            dirs.push(u);
        }
    }
    let inv = 1.0 / (dim as f64).sqrt();
    dirs.push(vec![inv; dim]);
    dirs.push(vec![-inv; dim]);
    for u in &dirs {
        for k in 1..=rays_per_dir {
            let t = radius * k as f64 / rays_per_dir as f64;
            grid.push(u.iter().map(|v| v * t).collect());
        }
    }
    let mut rng = seed::rng_for(seed_value, SeedRole::Direction, 0);
    while grid.len() < n {
        let g: Vec<f64> = (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let rad = radius * rng.random::<f64>().powf(1.0 / dim as f64);
        grid.push(g.iter().map(|v| v / norm * rad).collect());
    }
    grid.truncate(n.max(1));
    grid
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub y: Vec<f64>,
    pub av: f64,
    pub v: f64,
    pub excess: f64,
}

/// Result of a drift fit; serializes to the audit report layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftFit {
    pub c1: f64,
    pub c1_breve: f64,
    pub grid_size: usize,
    pub violations: Vec<Violation>,
    pub kappa: f64,
    pub c_hat2: f64,
    pub radius: f64,
}

/// Picks `(c1, c1_breve)` with `A_i <= -c1 V_i + c1_breve` at every pair
/// `(V_i, A_i)`, choosing `c1` to minimize the long-run level
/// `c1_breve / c1 = max(0, max_i (A_i / c1 + V_i))`.
///
/// With `u = 1/c1` the level is a convex piecewise-linear function of `u`,
/// so its minimizer is the crossing of an increasing and a decreasing line.
pub fn fit_affine_drift_bound(points: &[(f64, f64)]) -> Result<DriftConstants> {
    let distinct = points
        .iter()
        .any(|(v, _)| (v - points[0].0).abs() > 1e-12 * points[0].0.abs().max(1.0));
    if points.len() < 2 || !distinct {
        return Err(Error::InvalidParameter("drift fit needs at least two distinct V values".into()));
    }
    if points.iter().any(|(v, a)| !v.is_finite() || !a.is_finite() || *v < 0.0) {
        return Err(Error::NoValidConstants("non-finite or negative V on grid".into()));
    }
    if !points.iter().any(|(_, a)| *a < 0.0) {
        return Err(Error::NoValidConstants("AV >= 0 everywhere on the grid".into()));
    }
    let level = |u: f64| points.iter().map(|(v, a)| a * u + v).fold(f64::NEG_INFINITY, f64::max);

    if points.iter().all(|(_, a)| *a <= 0.0) {
        // c1_breve can be zero: largest c1 with A_i + c1 V_i <= 0.
        let c1 = points
            .iter()
            .filter(|(v, _)| *v > 0.0)
            .map(|(v, a)| -a / v)
            .fold(f64::INFINITY, f64::min);
        if !(c1 > 0.0 && c1.is_finite()) {
            return Err(Error::NoValidConstants("no decay at some grid point".into()));
        }
        return Ok(DriftConstants { c1, c1_breve: 0.0 });
    }

    // Bracket and golden-section search in log u.
    let (mut lo, mut hi) = (-30.0f64, 30.0f64);
    let gr = (5f64.sqrt() - 1.0) / 2.0;
    let obj = |t: f64| level(t.exp()).max(0.0);
    for _ in 0..200 {
        let m1 = hi - gr * (hi - lo);
        let m2 = lo + gr * (hi - lo);
        if obj(m1) <= obj(m2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    let u0 = (0.5 * (lo + hi)).exp();
    // Snap to the exact crossing of the active lines around u0.
    let active = |u: f64| {
        points
            .iter()
            .copied()
            .max_by(|x, y| (x.1 * u + x.0).total_cmp(&(y.1 * u + y.0)))
            .unwrap()
    };
    let left = active(u0 * (1.0 - 1e-6));
    let right = active(u0 * (1.0 + 1e-6));
    let mut u = u0;
    if left.1 < right.1 && right.1 > 0.0 && left.1 < 0.0 {
        let cross = (left.0 - right.0) / (right.1 - left.1);
        if cross > 0.0 && level(cross) <= level(u0) + 1e-12 * level(u0).abs().max(1.0) {
            u = cross;
        }
    } else if right.1 > 0.0 && left.1 > 0.0 {
        return Err(Error::NoValidConstants("drift bound degenerates (c1 -> infinity)".into()));
    }
    if u >= 30f64.exp() * 0.999 {
        return Err(Error::NoValidConstants("drift bound degenerates (c1 -> 0)".into()));
    }
    let c1 = 1.0 / u;
    let c1_breve = points
        .iter()
        .map(|(v, a)| a + c1 * v)
        .fold(f64::NEG_INFINITY, f64::max)
        .max(0.0);
    Ok(DriftConstants { c1, c1_breve })
}

fn evaluate_grid(model: &DiffusionModel, spec: &LyapunovSpec, grid: &[Vec<f64>]) -> Vec<(f64, f64)> {
    grid.par_iter()
        .map(|y| (lyapunov_value(model, spec, y), generator_of_v(model, spec, y)))
        .collect()
}

/// Fits `(c1, c1_breve)` on `grid`, then re-checks every grid point.
pub fn fit_drift_constants(model: &DiffusionModel, spec: &LyapunovSpec, grid: &[Vec<f64>]) -> Result<DriftFit> {
    if grid.len() < 2 {
        return Err(Error::InvalidParameter(format!("grid has {} points; need at least 2", grid.len())));
    }
    if let Some(y) = grid.iter().find(|y| y.len() != model.dim()) {
        return Err(Error::DimensionMismatch(format!("grid point of length {}", y.len())));
    }
    let pts = evaluate_grid(model, spec, grid);
    let fit = fit_affine_drift_bound(&pts)?;
    let scale = pts.iter().map(|(v, a)| v.abs().max(a.abs())).fold(1.0, f64::max);
    let violations = grid
        .iter()
        .zip(&pts)
        .filter_map(|(y, &(v, av))| {
            let excess = av - (-fit.c1 * v + fit.c1_breve);
            (excess > 1e-9 * scale).then(|| Violation {
                y: y.clone(),
                av,
                v,
                excess,
            })
        })
        .collect();
    let radius = grid
        .iter()
        .map(|y| y.iter().map(|v| v * v).sum::<f64>().sqrt())
        .fold(0.0, f64::max);
    Ok(DriftFit {
        c1: fit.c1,
        c1_breve: fit.c1_breve,
        grid_size: grid.len(),
        violations,
        kappa: spec.kappa,
        c_hat2: spec.c_hat2,
        radius,
    })
}

/// Builds a spec for the model: solves `Q`, scans `kappa` over
/// `{1e-2, ..., 1e2}` (log spaced) keeping the largest fitted `c1`, and sets
/// `c_hat2 = max(0, -min V_tilde) + 1e-6` on the grid.
pub fn tune_spec(model: &DiffusionModel, grid: &[Vec<f64>]) -> Result<(LyapunovSpec, QTilde, DriftFit)> {
    let qt = solve_q_tilde(model.r(), model.p())?;
    let kappas: Vec<f64> = (-4..=4).map(|k| 10f64.powf(k as f64 * 0.5)).collect();
    let mut best: Option<(LyapunovSpec, DriftFit)> = None;
    let mut last_err = None;
    for kappa in kappas {
        let mut spec = LyapunovSpec::new(qt.q.clone(), kappa, 0.0)?;
        let min_v = grid
            .iter()
            .map(|y| lyapunov_value(model, &spec, y))
            .fold(f64::INFINITY, f64::min);
        spec.c_hat2 = (-min_v).max(0.0) + 1e-6;
        match fit_drift_constants(model, &spec, grid) {
            Ok(fit) if fit.violations.is_empty() => {
                if best.as_ref().is_none_or(|(_, b)| fit.c1 > b.c1) {
                    spec.fitted = Some(DriftConstants {
                        c1: fit.c1,
                        c1_breve: fit.c1_breve,
                    });
                    best = Some((spec, fit));
                }
            }
            Ok(_) => {}
            Err(e) => last_err = Some(e),
        }
    }
    match best {
        Some((spec, fit)) => Ok((spec, qt, fit)),
        None => Err(last_err.unwrap_or_else(|| Error::NoValidConstants("no kappa produced a clean fit".into()))),
    }
}

/// Quadratic envelope `c_hat1 |y|^2 <= V(y) <= C_hat1 |y|^2 + C_hat2 + c_hat2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadraticBounds {
    pub c_hat1: f64,
    pub upper_c1: f64,
    pub upper_c2: f64,
    pub grad_c: f64,
}

/// Fits the quadratic envelope and `|grad V| <= C (1 + |y|)` on a grid.
pub fn fit_quadratic_bounds(model: &DiffusionModel, spec: &LyapunovSpec, grid: &[Vec<f64>]) -> QuadraticBounds {
    let mut c_hat1 = f64::INFINITY;
    let mut upper_c1: f64 = 0.0;
    let mut grad_c: f64 = 0.0;
    let vals: Vec<(f64, f64)> = grid
        .iter()
        .map(|y| {
            let n2: f64 = y.iter().map(|v| v * v).sum();
            (n2, lyapunov_value(model, spec, y))
        })
        .collect();
    for (y, &(n2, v)) in grid.iter().zip(&vals) {
        if n2 > 1e-12 {
            c_hat1 = c_hat1.min(v / n2);
        }
        if n2 >= 1.0 {
            upper_c1 = upper_c1.max((v - spec.c_hat2) / n2);
        }
        let g = lyapunov_gradient(model, spec, y).norm();
        grad_c = grad_c.max(g / (1.0 + n2.sqrt()));
    }
    let upper_c2 = vals
        .iter()
        .map(|&(n2, v)| v - spec.c_hat2 - upper_c1 * n2)
        .fold(0.0, f64::max);
    QuadraticBounds {
        c_hat1,
        upper_c1,
        upper_c2,
        grad_c,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentAuditRow {
    pub time: f64,
    pub mean: f64,
    pub stderr: f64,
    pub bound: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentAudit {
    pub ell: u32,
    pub c1: f64,
    pub c_ell_breve: f64,
    pub rows: Vec<MomentAuditRow>,
    pub max_ratio: f64,
    /// Times where the estimate exceeds the bound by more than 3 standard errors.
    pub violations: Vec<f64>,
}

/// Compares the empirical `E V^ell(X_t)` across trajectories with
/// `e^{-c1 t} V^ell(x) + c_ell_breve (1 - e^{-c1 t}) / c1`.
pub fn moment_bound_audit(
    model: &DiffusionModel,
    trajectories: &[Trajectory],
    spec: &LyapunovSpec,
    ell: u32,
    c1: f64,
    c_ell_breve: f64,
) -> Result<MomentAudit> {
    let first = trajectories.first().ok_or_else(|| Error::EmptyInput("no trajectories".into()))?;
    if trajectories.iter().any(|t| t.x0 != first.x0 || t.len() != first.len() || t.eta != first.eta) {
        return Err(Error::InvalidParameter("trajectories must share x0, eta and length".into()));
    }
    let vl = |y: &[f64]| lyapunov_value(model, spec, y).powi(ell as i32);
    let v0 = vl(&first.x0);
    let bound = |t: f64| (-c1 * t).exp() * v0 + c_ell_breve * (1.0 - (-c1 * t).exp()) / c1;
    let mut rows = vec![MomentAuditRow {
        time: 0.0,
        mean: v0,
        stderr: 0.0,
        bound: bound(0.0),
        ratio: v0 / bound(0.0),
    }];
    for j in 0..first.len() {
        let vals: Vec<f64> = trajectories.iter().map(|t| vl(t.row(j))).collect();
        let (mean, stderr) = crate::em::mean_and_stderr(&vals);
        let time = first.time(j);
        let b = bound(time);
        rows.push(MomentAuditRow {
            time,
            mean,
            stderr,
            bound: b,
            ratio: mean / b,
        });
    }
    let max_ratio = rows.iter().map(|r| r.ratio).fold(f64::NEG_INFINITY, f64::max);
    let violations = rows
        .iter()
        .filter(|r| r.mean - 3.0 * r.stderr > r.bound)
        .map(|r| r.time)
        .collect();
    Ok(MomentAudit {
        ell,
        c1,
        c_ell_breve,
        rows,
        max_ratio,
        violations,
    })
}
