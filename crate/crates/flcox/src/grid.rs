use crate::error::{FlcoxError, Result};
use ndarray::Array1;

/// An ordered observation grid on a closed interval, together with trapezoid
/// quadrature weights. All integrals in the crate (scores, IMSE, covariance
/// inner products) are taken against these weights.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingGrid {
    points: Array1<f64>,
    quad_weights: Array1<f64>,
}

impl SamplingGrid {
    /// Build a grid from strictly increasing abscissae. Requires at least 4 points.
    pub fn new(points: Vec<f64>) -> Result<Self> {
        let n = points.len();
        if n < 4 {
            return Err(FlcoxError::InvalidGrid(n));
        }
        if points.iter().any(|p| !p.is_finite()) {
            return Err(FlcoxError::NonFinite("grid points"));
        }
        if points.windows(2).any(|w| w[0] >= w[1]) {
            return Err(FlcoxError::InvalidGrid(n));
        }
        let mut weights = vec![0.0; n];
        for j in 0..n - 1 {
            let h = points[j + 1] - points[j];
            weights[j] += h / 2.0;
            weights[j + 1] += h / 2.0;
        }
        Ok(Self {
            points: Array1::from(points),
            quad_weights: Array1::from(weights),
        })
    }

    /// `n` equidistant points on `[a, b]`.
    pub fn equidistant(a: f64, b: f64, n: usize) -> Result<Self> {
        if n < 4 || !(a < b) {
            return Err(FlcoxError::InvalidGrid(n));
        }
        let h = (b - a) / (n - 1) as f64;
        Self::new((0..n).map(|j| a + j as f64 * h).collect())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &Array1<f64> {
        &self.points
    }

    pub fn quad_weights(&self) -> &Array1<f64> {
        &self.quad_weights
    }

    pub fn lower(&self) -> f64 {
        self.points[0]
    }

    pub fn upper(&self) -> f64 {
        self.points[self.points.len() - 1]
    }

    /// Trapezoid quadrature of values sampled on this grid.
    pub fn integrate(&self, values: &Array1<f64>) -> f64 {
        self.quad_weights.dot(values)
    }

    /// Weighted L2 inner product of two sampled functions.
    pub fn inner(&self, f: &Array1<f64>, g: &Array1<f64>) -> f64 {
        f.iter()
            .zip(g.iter())
            .zip(self.quad_weights.iter())
            .map(|((a, b), w)| a * b * w)
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn weights_sum_to_interval_length() {
        let g = SamplingGrid::equidistant(0.0, 1.0, 101).unwrap();
        assert_abs_diff_eq!(g.quad_weights().sum(), 1.0, epsilon = 1e-12);
        let g = SamplingGrid::new(vec![0.0, 0.1, 0.5, 0.7, 2.0]).unwrap();
        assert_abs_diff_eq!(g.quad_weights().sum(), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn rejects_short_or_unsorted() {
        assert!(SamplingGrid::new(vec![0.0, 1.0, 2.0]).is_err());
        assert!(SamplingGrid::new(vec![0.0, 0.5, 0.5, 1.0]).is_err());
        assert!(SamplingGrid::new(vec![0.0, 0.6, 0.5, 1.0]).is_err());
    }

    #[test]
    fn trapezoid_integrates_linear_exactly() {
        let g = SamplingGrid::equidistant(0.0, 1.0, 11).unwrap();
        let vals = g.points().mapv(|s| 3.0 * s + 1.0);
        assert_abs_diff_eq!(g.integrate(&vals), 2.5, epsilon = 1e-12);
    }
}
