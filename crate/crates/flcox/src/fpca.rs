use crate::error::{FlcoxError, Result};
use crate::grid::SamplingGrid;
use crate::linalg::sym_eigen;
use crate::smoothing::SmoothedCurves;
use ndarray::{Array1, Array2, Axis};

/// Cap on the number of retained eigenpairs; the tail beyond this is
/// numerical noise at the scales this crate targets.
pub const K_MAX_CAP: usize = 35;

/// Discretized covariance kernel G(s_j, s_l) on a sampling grid.
#[derive(Debug, Clone)]
pub struct CovarianceKernel {
    matrix: Array2<f64>,
    grid: SamplingGrid,
}

impl CovarianceKernel {
    /// Wrap a precomputed kernel matrix, enforcing symmetry by averaging with
    /// the transpose.
    pub fn new(matrix: Array2<f64>, grid: SamplingGrid) -> Result<Self> {
        if matrix.nrows() != grid.len() || matrix.ncols() != grid.len() {
            return Err(FlcoxError::DimensionMismatch(format!(
                "kernel is {}x{} but grid has {} points",
                matrix.nrows(),
                matrix.ncols(),
                grid.len()
            )));
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(FlcoxError::NonFinite("covariance kernel"));
        }
        let sym = 0.5 * (&matrix + &matrix.t());
        Ok(Self { matrix: sym, grid })
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.matrix
    }

    pub fn grid(&self) -> &SamplingGrid {
        &self.grid
    }
}

/// Empirical covariance of centered curves: (1/n) sum_i x_i(s) x_i(u).
pub fn empirical_covariance(
    centered: &SmoothedCurves,
    grid: &SamplingGrid,
) -> Result<CovarianceKernel> {
    let x = &centered.centered;
    let n = x.nrows();
    if n < 2 {
        return Err(FlcoxError::InsufficientSample(n));
    }
    let cov = x.t().dot(x) / n as f64;
    CovarianceKernel::new(cov, grid.clone())
}

/// Eigenpairs of the covariance kernel in the quadrature-weighted L2 sense,
/// plus the truncation state.
#[derive(Debug, Clone)]
pub struct FpcaBasis {
    /// Descending eigenvalues (curve-variance units).
    pub eigenvalues: Array1<f64>,
    /// Eigenfunctions evaluated on the grid, one per row.
    pub eigenfunctions: Array2<f64>,
    /// Selected truncation level; `eigenvalues.len()` until selection runs.
    pub k: usize,
    /// Explained-variance fraction used to select `k`.
    pub threshold: f64,
    grid: SamplingGrid,
}

/// Solve the weighted eigenproblem: diagonalize W^{1/2} G W^{1/2} and map the
/// eigenvectors back by W^{-1/2}, so eigenfunctions are orthonormal under the
/// trapezoid inner product. Sign convention: integral of each eigenfunction
/// is nonnegative, tie-broken by the first coordinate exceeding 1e-8 in
/// absolute value being positive.
pub fn eigendecompose(cov: &CovarianceKernel) -> Result<FpcaBasis> {
    let grid = cov.grid().clone();
    let j = grid.len();
    let sqrt_w = grid.quad_weights().mapv(f64::sqrt);
    let mut m = cov.matrix().clone();
    for r in 0..j {
        for c in 0..j {
            m[[r, c]] *= sqrt_w[r] * sqrt_w[c];
        }
    }
    let (evals, evecs) = sym_eigen(&m)?;
    let keep = j.min(K_MAX_CAP);
    let mut eigenvalues = Array1::zeros(keep);
    let mut eigenfunctions = Array2::zeros((keep, j));
    for k in 0..keep {
        eigenvalues[k] = evals[k].max(0.0);
        for r in 0..j {
            eigenfunctions[[k, r]] = evecs[[r, k]] / sqrt_w[r];
        }
        if needs_flip(&eigenfunctions.row(k).into_owned(), &grid) {
            eigenfunctions.row_mut(k).mapv_inplace(|v| -v);
        }
    }
    Ok(FpcaBasis {
        eigenvalues,
        eigenfunctions,
        k: keep,
        threshold: 1.0,
        grid,
    })
}

/// Returns true when the row should be flipped.
fn needs_flip(phi: &Array1<f64>, grid: &SamplingGrid) -> bool {
    let integral = grid.integrate(phi);
    if integral.abs() > 1e-10 {
        return integral < 0.0;
    }
    match phi.iter().find(|v| v.abs() > 1e-8) {
        Some(first) => *first < 0.0,
        None => false,
    }
}

/// Smallest K whose cumulative eigenvalue share reaches the threshold.
pub fn select_truncation(basis: &FpcaBasis, threshold: f64) -> Result<usize> {
    if !(0.0 < threshold && threshold < 1.0) {
        return Err(FlcoxError::InvalidInput(format!(
            "explained-variance threshold must lie in (0,1), got {threshold}"
        )));
    }
    let total: f64 = basis.eigenvalues.sum();
    if total <= 0.0 {
        return Err(FlcoxError::DegenerateSpectrum);
    }
    let mut cum = 0.0;
    for (k, lambda) in basis.eigenvalues.iter().enumerate() {
        cum += lambda;
        if cum >= threshold * total {
            return Ok(k + 1);
        }
    }
    Ok(basis.eigenvalues.len())
}

impl FpcaBasis {
    /// Apply an explained-variance truncation in place.
    pub fn truncate(&mut self, threshold: f64) -> Result<()> {
        self.k = select_truncation(self, threshold)?;
        self.threshold = threshold;
        Ok(())
    }

    pub fn grid(&self) -> &SamplingGrid {
        &self.grid
    }

    /// The k-th eigenfunction on the grid.
    pub fn eigenfunction(&self, k: usize) -> Array1<f64> {
        self.eigenfunctions.row(k).into_owned()
    }
}

/// FPC scores: xi_ik = integral of the centered curve against eigenfunction k,
/// for the first `basis.k` components.
pub fn compute_scores(
    centered: &Array2<f64>,
    basis: &FpcaBasis,
    grid: &SamplingGrid,
) -> Array2<f64> {
    let n = centered.nrows();
    let mut scores = Array2::zeros((n, basis.k));
    let weighted: Array2<f64> = centered * &grid.quad_weights().view().insert_axis(Axis(0));
    for k in 0..basis.k {
        let phi = basis.eigenfunctions.row(k);
        let col = weighted.dot(&phi);
        scores.column_mut(k).assign(&col);
    }
    scores
}
