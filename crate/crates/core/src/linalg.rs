//! Small dense helpers on top of nalgebra. Dimensions here are phase
//! counts, so everything is O(d^3) with d around 10 at most.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Largest singular value.
pub fn op_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().max()
}

/// Hilbert-Schmidt (Frobenius) norm.
pub fn hs_norm(m: &DMatrix<f64>) -> f64 {
    m.norm()
}

/// Largest absolute asymmetry `max |A_ij - A_ji|`.
pub fn asymmetry(m: &DMatrix<f64>) -> f64 {
    (m - m.transpose()).amax()
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Eigenvalues of the symmetric part of `m`, ascending.
pub fn sym_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let mut ev: Vec<f64> = symmetrize(m).symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

pub fn lambda_min(m: &DMatrix<f64>) -> f64 {
    sym_eigenvalues(m).first().copied().unwrap_or(f64::NAN)
}

pub fn lambda_max(m: &DMatrix<f64>) -> f64 {
    sym_eigenvalues(m).last().copied().unwrap_or(f64::NAN)
}

/// Largest eigenvalue of a symmetric matrix together with a unit eigenvector.
pub fn top_eigenpair(m: &DMatrix<f64>) -> (f64, DVector<f64>) {
    let eig = symmetrize(m).symmetric_eigen();
    let (idx, val) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, v)| (i, *v))
        .expect("non-empty matrix");
    (val, eig.eigenvectors.column(idx).into_owned())
}

/// Lower-triangular Cholesky factor of a symmetric positive-definite matrix.
pub fn cholesky_lower(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    match m.clone().cholesky() {
        Some(c) => Ok(c.l()),
        None => Err(Error::NotPositiveDefinite {
            min_eigenvalue: lambda_min(m),
        }),
    }
}

/// Solves `Q A + A' Q = rhs` for `Q` through the Kronecker form
/// `(A' (x) I + I (x) A') vec(Q) = vec(rhs)`.
pub fn solve_lyapunov(a: &DMatrix<f64>, rhs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let d = a.nrows();
    if a.ncols() != d || rhs.shape() != (d, d) {
        return Err(Error::DimensionMismatch("lyapunov operands must be square and equal size".into()));
    }
    let eye = DMatrix::<f64>::identity(d, d);
    let at = a.transpose();
    let op = at.kronecker(&eye) + eye.kronecker(&at);
    let rhs_vec = DVector::from_column_slice(rhs.as_slice());
    let sol = op
        .lu()
        .solve(&rhs_vec)
        .ok_or_else(|| Error::Singular("lyapunov operator (A has eigenvalues summing to zero)".into()))?;
    Ok(symmetrize(&DMatrix::from_column_slice(d, d, sol.as_slice())))
}

/// True when every eigenvalue of `m` has strictly negative real part.
pub fn is_hurwitz(m: &DMatrix<f64>) -> bool {
    m.complex_eigenvalues().iter().all(|z| z.re < 0.0)
}

/// Orthonormal basis (columns) of the null space of `m`.
pub fn null_space(m: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    let n = m.ncols();
    if m.nrows() == 0 {
        return DMatrix::identity(n, n);
    }
    // Pad to square so the SVD yields a full right basis.
    let rows = m.nrows().max(n);
    let mut padded = DMatrix::<f64>::zeros(rows, n);
    padded.view_mut((0, 0), (m.nrows(), n)).copy_from(m);
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let scale = svd.singular_values.max().max(1.0);
    let cols: Vec<DVector<f64>> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, s)| **s <= tol * scale)
        .map(|(i, _)| v_t.row(i).transpose())
        .collect();
    if cols.is_empty() {
        DMatrix::zeros(n, 0)
    } else {
        DMatrix::from_columns(&cols)
    }
}
