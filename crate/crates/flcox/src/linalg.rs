//! Thin wrappers around nalgebra for the dense factorizations the crate needs.

use crate::error::{FlcoxError, Result};
use nalgebra::{DMatrix, DVector};
use ndarray::{Array1, Array2};

fn to_na(m: &Array2<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[[i, j]])
}

/// Eigendecomposition of a symmetric matrix, eigenvalues descending.
/// Returns (eigenvalues, eigenvectors as columns).
pub fn sym_eigen(m: &Array2<f64>) -> Result<(Array1<f64>, Array2<f64>)> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(FlcoxError::DimensionMismatch(format!(
            "sym_eigen expects a square matrix, got {}x{}",
            n,
            m.ncols()
        )));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(FlcoxError::NonFinite("symmetric eigendecomposition input"));
    }
    let se = to_na(m).symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| se.eigenvalues[b].partial_cmp(&se.eigenvalues[a]).unwrap());
    let evals = Array1::from_iter(order.iter().map(|&k| se.eigenvalues[k]));
    let mut evecs = Array2::zeros((n, n));
    for (col, &k) in order.iter().enumerate() {
        for i in 0..n {
            evecs[[i, col]] = se.eigenvectors[(i, k)];
        }
    }
    Ok((evals, evecs))
}

/// Cholesky factorization of a symmetric positive-definite matrix, reusable
/// for several right-hand sides.
pub struct CholFactor {
    inner: nalgebra::Cholesky<f64, nalgebra::Dyn>,
}

impl CholFactor {
    pub fn new(m: &Array2<f64>) -> Option<Self> {
        to_na(m).cholesky().map(|inner| Self { inner })
    }

    pub fn solve(&self, rhs: &Array1<f64>) -> Array1<f64> {
        let b = DVector::from_iterator(rhs.len(), rhs.iter().copied());
        let x = self.inner.solve(&b);
        Array1::from_iter(x.iter().copied())
    }

    /// Trace of the inverse of the factored matrix.
    pub fn trace_inverse(&self) -> f64 {
        let n = self.inner.l_dirty().nrows();
        let mut tr = 0.0;
        for j in 0..n {
            let mut e = DVector::zeros(n);
            e[j] = 1.0;
            tr += self.inner.solve(&e)[j];
        }
        tr
    }
}

/// Solve a symmetric positive-definite system with ridge escalation.
/// Starts from the bare matrix and adds `1e-10 * mean(diag)` ridge once before
/// giving up, mirroring the collinearity contract of the fitting layer.
pub fn solve_spd(m: &Array2<f64>, rhs: &Array1<f64>) -> Result<Array1<f64>> {
    if let Some(f) = CholFactor::new(m) {
        return Ok(f.solve(rhs));
    }
    let n = m.nrows();
    let scale = (0..n).map(|i| m[[i, i]]).sum::<f64>() / n as f64;
    let ridge = 1e-10 * scale.max(1.0);
    let mut mr = m.clone();
    for i in 0..n {
        mr[[i, i]] += ridge;
    }
    match CholFactor::new(&mr) {
        Some(f) => Ok(f.solve(rhs)),
        None => Err(FlcoxError::Collinear),
    }
}
