use crate::bspline::BSplineBasis;
use crate::error::{FlcoxError, Result};
use crate::grid::SamplingGrid;
use crate::linalg::CholFactor;
use ndarray::{Array1, Array2, Axis};

/// Discretely observed, noise-contaminated curves: one row per subject,
/// one column per grid point.
#[derive(Debug, Clone)]
pub struct RawCurves {
    values: Array2<f64>,
}

impl RawCurves {
    pub fn new(values: Array2<f64>) -> Result<Self> {
        if values.nrows() < 2 {
            return Err(FlcoxError::InsufficientSample(values.nrows()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(FlcoxError::NonFinite("raw curves"));
        }
        Ok(Self { values })
    }

    pub fn n_curves(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_points(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }
}

/// Output of the smoothing step: per-curve spline coefficients, fitted values
/// on the grid, the cross-sectional mean curve, and mean-centered curves.
#[derive(Debug, Clone)]
pub struct SmoothedCurves {
    pub coefficients: Array2<f64>,
    pub fitted: Array2<f64>,
    pub mean_curve: Array1<f64>,
    pub centered: Array2<f64>,
}

/// Ridge-stabilized least-squares projection of each curve onto the spline
/// span, followed by centering. `ridge = 0` is plain least squares and fails
/// on singular normal equations.
pub fn smooth_curves(raw: &RawCurves, basis: &BSplineBasis, ridge: f64) -> Result<SmoothedCurves> {
    let eval = basis.eval();
    if raw.n_points() != eval.nrows() {
        return Err(FlcoxError::DimensionMismatch(format!(
            "curves have {} columns but the basis grid has {} points",
            raw.n_points(),
            eval.nrows()
        )));
    }
    if ridge < 0.0 {
        return Err(FlcoxError::InvalidInput("ridge must be nonnegative".into()));
    }
    let b = basis.n_basis();
    let mut gram = eval.t().dot(eval);
    for i in 0..b {
        gram[[i, i]] += ridge;
    }
    let factor = CholFactor::new(&gram).ok_or(FlcoxError::SingularSmoothing)?;
    let mut coefficients = Array2::zeros((raw.n_curves(), b));
    for (i, curve) in raw.values().axis_iter(Axis(0)).enumerate() {
        let rhs = eval.t().dot(&curve);
        coefficients.row_mut(i).assign(&factor.solve(&rhs));
    }
    let fitted = coefficients.dot(&eval.t());
    Ok(center(coefficients, fitted))
}

/// Re-center smoothed curves around their cross-sectional mean. Idempotent up
/// to the accumulated mean, i.e. centering twice equals centering once.
pub fn center_curves(smoothed: &SmoothedCurves) -> SmoothedCurves {
    center(smoothed.coefficients.clone(), smoothed.fitted.clone())
}

fn center(coefficients: Array2<f64>, fitted: Array2<f64>) -> SmoothedCurves {
    let mean_curve = fitted.mean_axis(Axis(0)).expect("at least one curve");
    let centered = &fitted - &mean_curve;
    SmoothedCurves {
        coefficients,
        fitted,
        mean_curve,
        centered,
    }
}

/// Smooth out-of-sample curves with a basis fitted on training data and center
/// them with the training mean curve (used for test-set score projection).
pub fn smooth_with_mean(
    raw: &RawCurves,
    basis: &BSplineBasis,
    ridge: f64,
    train_mean: &Array1<f64>,
) -> Result<Array2<f64>> {
    let smoothed = smooth_curves(raw, basis, ridge)?;
    Ok(&smoothed.fitted - train_mean)
}

/// Grid-weighted mean squared smoothing residual, averaged over curves.
pub fn mean_smoothing_residual(raw: &RawCurves, smoothed: &SmoothedCurves, grid: &SamplingGrid) -> f64 {
    let n = raw.n_curves() as f64;
    let mut total = 0.0;
    for i in 0..raw.n_curves() {
        for (j, w) in grid.quad_weights().iter().enumerate() {
            let r = raw.values()[[i, j]] - smoothed.fitted[[i, j]];
            total += w * r * r;
        }
    }
    total / n
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bspline::build_bspline_basis;
    use approx::assert_abs_diff_eq;

    fn setup(n_basis: usize) -> (SamplingGrid, BSplineBasis) {
        let grid = SamplingGrid::equidistant(0.0, 1.0, 101).unwrap();
        let basis = build_bspline_basis(&grid, 4, n_basis).unwrap();
        (grid, basis)
    }

    #[test]
    fn reproduces_in_span_curve() {
        let (_, basis) = setup(12);
        // a curve that lies exactly in the spline span
        let coef = Array1::from_iter((0..12).map(|b| (b as f64 * 0.7).sin()));
        let curve = basis.eval().dot(&coef);
        let mut values = Array2::zeros((2, 101));
        values.row_mut(0).assign(&curve);
        values.row_mut(1).assign(&curve.mapv(|v| -v));
        let raw = RawCurves::new(values).unwrap();
        let sm = smooth_curves(&raw, &basis, 0.0).unwrap();
        for j in 0..101 {
            assert_abs_diff_eq!(sm.fitted[[0, j]], curve[j], epsilon = 1e-9);
        }
    }

    #[test]
    fn constant_curve_is_fitted_exactly() {
        let (_, basis) = setup(20);
        let raw = RawCurves::new(Array2::from_elem((3, 101), 3.0)).unwrap();
        let sm = smooth_curves(&raw, &basis, 0.0).unwrap();
        for v in sm.fitted.iter() {
            assert_abs_diff_eq!(*v, 3.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn smoothing_is_idempotent() {
        let (_, basis) = setup(15);
        let mut values = Array2::zeros((3, 101));
        for i in 0..3 {
            for j in 0..101 {
                let s = j as f64 / 100.0;
                values[[i, j]] = (s * (i + 1) as f64 * 3.0).sin() + 0.1 * (i as f64);
            }
        }
        let raw = RawCurves::new(values).unwrap();
        let once = smooth_curves(&raw, &basis, 0.0).unwrap();
        let again = smooth_curves(&RawCurves::new(once.fitted.clone()).unwrap(), &basis, 0.0).unwrap();
        for (a, b) in once.fitted.iter().zip(again.fitted.iter()) {
            assert_abs_diff_eq!(*a, *b, epsilon = 1e-9);
        }
    }

    #[test]
    fn centering_properties() {
        let (_, basis) = setup(10);
        // n identical curves center to zero
        let raw = RawCurves::new(Array2::from_elem((4, 101), 1.5)).unwrap();
        let sm = smooth_curves(&raw, &basis, 0.0).unwrap();
        for v in sm.centered.iter() {
            assert_abs_diff_eq!(*v, 0.0, epsilon = 1e-10);
        }
        // +f and -f: mean is zero, centered equals fitted
        let coef = Array1::from_iter((0..10).map(|b| b as f64));
        let f = basis.eval().dot(&coef);
        let mut values = Array2::zeros((2, 101));
        values.row_mut(0).assign(&f);
        values.row_mut(1).assign(&f.mapv(|v| -v));
        let sm = smooth_curves(&RawCurves::new(values).unwrap(), &basis, 0.0).unwrap();
        for j in 0..101 {
            assert_abs_diff_eq!(sm.mean_curve[j], 0.0, epsilon = 1e-10);
            assert_abs_diff_eq!(sm.centered[[0, j]], sm.fitted[[0, j]], epsilon = 1e-10);
        }
    }

    #[test]
    fn column_means_of_centered_vanish() {
        let (_, basis) = setup(14);
        let mut values = Array2::zeros((5, 101));
        let mut state = 88172645463325252u64;
        let mut next = || {
            // xorshift, enough for a fixture
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state as f64 / u64::MAX as f64) - 0.5
        };
        for v in values.iter_mut() {
            *v = next();
        }
        let raw = RawCurves::new(values).unwrap();
        let sm = smooth_curves(&raw, &basis, 1e-8).unwrap();
        // direct column-mean recomputation
        for j in 0..101 {
            let mean: f64 = (0..5).map(|i| sm.centered[[i, j]]).sum::<f64>() / 5.0;
            assert_abs_diff_eq!(mean, 0.0, epsilon = 1e-10);
        }
        // centering is a projection
        let twice = center_curves(&sm);
        for (a, b) in sm.centered.iter().zip(twice.centered.iter()) {
            assert_abs_diff_eq!(*a, *b, epsilon = 1e-12);
        }
    }
}
