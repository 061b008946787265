use crate::error::{FlcoxError, Result};
use crate::fpca::FpcaBasis;
use crate::grid::SamplingGrid;
use crate::survival::SurvivalRecord;
use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

/// A coefficient function beta(s) sampled on the FPCA grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientFunction {
    pub grid: SamplingGrid,
    pub values: Array1<f64>,
}

/// The paper-style evaluation metrics of one fitted replication.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct MetricsRecord {
    pub ci_in: f64,
    pub ci_out: f64,
    /// Per-coefficient mean squared error of the scalar coefficients.
    pub mse_gamma: f64,
    pub imse_beta: f64,
    pub censor_rate: f64,
}

/// beta(s_j) = sum_k beta_k phi_k(s_j) over the selected components.
pub fn reconstruct_beta(beta_coef: &Array1<f64>, basis: &FpcaBasis) -> Result<CoefficientFunction> {
    if beta_coef.len() != basis.k {
        return Err(FlcoxError::DimensionMismatch(format!(
            "{} coefficients for truncation level {}",
            beta_coef.len(),
            basis.k
        )));
    }
    let j = basis.grid().len();
    let mut values = Array1::zeros(j);
    for k in 0..basis.k {
        let phi = basis.eigenfunctions.row(k);
        for idx in 0..j {
            values[idx] += beta_coef[k] * phi[idx];
        }
    }
    Ok(CoefficientFunction {
        grid: basis.grid().clone(),
        values,
    })
}

/// Squared Euclidean distance between estimated and true scalar coefficients.
pub fn mse_gamma(gamma_hat: &Array1<f64>, gamma_true: &Array1<f64>) -> Result<f64> {
    if gamma_hat.len() != gamma_true.len() {
        return Err(FlcoxError::DimensionMismatch(
            "gamma vectors have different lengths".into(),
        ));
    }
    Ok(gamma_hat
        .iter()
        .zip(gamma_true.iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum())
}

/// Trapezoid quadrature of the squared difference between the estimated and
/// true coefficient functions on the shared grid.
pub fn imse_beta(beta_hat: &CoefficientFunction, beta_true_on_grid: &Array1<f64>) -> Result<f64> {
    if beta_true_on_grid.len() != beta_hat.values.len() {
        return Err(FlcoxError::DimensionMismatch(
            "true coefficient sampled on a different grid".into(),
        ));
    }
    let diff2 = (&beta_hat.values - beta_true_on_grid).mapv(|v| v * v);
    Ok(beta_hat.grid.integrate(&diff2))
}

/// Harrell's concordance index over censoring-comparable pairs: a pair is
/// comparable iff the earlier subject's time is strictly smaller and that
/// subject is an event; concordant when the earlier subject carries strictly
/// higher risk, with risk ties counting one half.
pub fn concordance(records: &[SurvivalRecord], risk: &Array1<f64>) -> Result<f64> {
    if records.len() != risk.len() {
        return Err(FlcoxError::DimensionMismatch(
            "risk vector length does not match records".into(),
        ));
    }
    let n = records.len();
    let mut concordant = 0.0;
    let mut comparable = 0u64;
    for i in 0..n {
        if !records[i].is_event() {
            continue;
        }
        for j in 0..n {
            if i == j || records[i].time >= records[j].time {
                continue;
            }
            comparable += 1;
            if risk[i] > risk[j] {
                concordant += 1.0;
            } else if risk[i] == risk[j] {
                concordant += 0.5;
            }
        }
    }
    if comparable == 0 {
        return Err(FlcoxError::NoComparablePairs);
    }
    Ok(concordant / comparable as f64)
}

/// Pointwise summary of a bootstrap ensemble of coefficient functions.
#[derive(Debug, Clone)]
pub struct BootstrapBeta {
    /// One row per completed replicate, one column per grid point.
    pub curves: Array2<f64>,
    pub mean: Array1<f64>,
    /// Replicates skipped because the resample carried no events.
    pub skipped: usize,
}

impl BootstrapBeta {
    /// Interpolated percentile (0..100) across replicates at every grid point.
    pub fn percentile(&self, p: f64) -> Array1<f64> {
        let b = self.curves.nrows();
        let j = self.curves.ncols();
        let mut out = Array1::zeros(j);
        for col in 0..j {
            let mut vals: Vec<f64> = (0..b).map(|r| self.curves[[r, col]]).collect();
            vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
            out[col] = interpolated_quantile(&vals, p / 100.0);
        }
        out
    }

    pub fn pointwise_variance(&self) -> Array1<f64> {
        let b = self.curves.nrows() as f64;
        let j = self.curves.ncols();
        let mut out = Array1::zeros(j);
        for col in 0..j {
            let mean = self.mean[col];
            out[col] = (0..self.curves.nrows())
                .map(|r| {
                    let d = self.curves[[r, col]] - mean;
                    d * d
                })
                .sum::<f64>()
                / b;
        }
        out
    }
}

fn interpolated_quantile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = q.clamp(0.0, 1.0) * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] * (1.0 - frac) + sorted[hi] * frac
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fpca::{eigendecompose, CovarianceKernel};
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    fn toy_basis() -> FpcaBasis {
        let grid = SamplingGrid::equidistant(0.0, 1.0, 101).unwrap();
        let f = grid
            .points()
            .mapv(|s| (2.0 * std::f64::consts::PI * s).sin());
        let g = grid
            .points()
            .mapv(|s| (2.0 * std::f64::consts::PI * s).cos() + 0.4);
        let mut m = Array2::zeros((101, 101));
        for r in 0..101 {
            for c in 0..101 {
                m[[r, c]] = 2.0 * f[r] * f[c] + 0.5 * g[r] * g[c];
            }
        }
        let kernel = CovarianceKernel::new(m, grid).unwrap();
        let mut basis = eigendecompose(&kernel).unwrap();
        basis.k = 3;
        basis
    }

    #[test]
    fn reconstruct_unit_vector_gives_eigenfunction() {
        let basis = toy_basis();
        let beta = reconstruct_beta(&array![1.0, 0.0, 0.0], &basis).unwrap();
        let phi = basis.eigenfunction(0);
        for j in 0..101 {
            assert_abs_diff_eq!(beta.values[j], phi[j], epsilon = 1e-12);
        }
        let zero = reconstruct_beta(&Array1::zeros(3), &basis).unwrap();
        assert!(zero.values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn reconstruct_satisfies_parseval() {
        let basis = toy_basis();
        let coef = array![0.7, -1.3, 0.25];
        let beta = reconstruct_beta(&coef, &basis).unwrap();
        let norm2 = beta.grid.inner(&beta.values, &beta.values);
        // orthonormal eigenfunctions: integral of beta^2 equals |coef|^2
        assert_abs_diff_eq!(norm2, coef.dot(&coef), epsilon = 1e-8);
    }

    #[test]
    fn reconstruct_is_linear() {
        let basis = toy_basis();
        let u = array![0.5, 0.1, -0.2];
        let v = array![-0.3, 0.8, 0.4];
        let lhs = reconstruct_beta(&(2.0 * &u + 3.0 * &v), &basis).unwrap();
        let ru = reconstruct_beta(&u, &basis).unwrap();
        let rv = reconstruct_beta(&v, &basis).unwrap();
        for j in 0..101 {
            assert_abs_diff_eq!(
                lhs.values[j],
                2.0 * ru.values[j] + 3.0 * rv.values[j],
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn mse_examples() {
        let truth = Array1::from_elem(6, 0.5);
        assert_abs_diff_eq!(mse_gamma(&truth, &truth).unwrap(), 0.0, epsilon = 1e-15);
        let hat = truth.mapv(|v| v + 0.1);
        assert_abs_diff_eq!(mse_gamma(&hat, &truth).unwrap(), 0.06, epsilon = 1e-12);
    }

    #[test]
    fn imse_examples() {
        let grid = SamplingGrid::equidistant(0.0, 1.0, 101).unwrap();
        let truth = grid.points().mapv(|s| s * s);
        let exact = CoefficientFunction {
            grid: grid.clone(),
            values: truth.clone(),
        };
        assert_abs_diff_eq!(imse_beta(&exact, &truth).unwrap(), 0.0, epsilon = 1e-15);
        let off_by_one = CoefficientFunction {
            grid: grid.clone(),
            values: truth.mapv(|v| v + 1.0),
        };
        assert_abs_diff_eq!(imse_beta(&off_by_one, &truth).unwrap(), 1.0, epsilon = 1e-12);
        // constant difference of 0.5 integrates to 0.25 on any grid refinement
        for n in [101usize, 1001] {
            let g = SamplingGrid::equidistant(0.0, 1.0, n).unwrap();
            let t = g.points().mapv(|s| s.sin());
            let half = CoefficientFunction {
                grid: g.clone(),
                values: t.mapv(|v| v + 0.5),
            };
            assert_abs_diff_eq!(imse_beta(&half, &t).unwrap(), 0.25, epsilon = 1e-12);
        }
    }

    fn rec(time: f64, status: u8, group: usize) -> SurvivalRecord {
        SurvivalRecord::new(time, status, group).unwrap()
    }

    #[test]
    fn concordance_extremes() {
        let records: Vec<SurvivalRecord> =
            (0..5).map(|i| rec((i + 1) as f64, 1, i)).collect();
        // risk anti-sorted with event times: perfect discrimination
        let risk = array![5.0, 4.0, 3.0, 2.0, 1.0];
        assert_abs_diff_eq!(concordance(&records, &risk).unwrap(), 1.0, epsilon = 1e-15);
        // constant risk: all ties
        let flat = Array1::zeros(5);
        assert_abs_diff_eq!(concordance(&records, &flat).unwrap(), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn concordance_undefined_without_comparable_pairs() {
        let records = vec![rec(1.0, 0, 0), rec(2.0, 0, 1)];
        assert!(matches!(
            concordance(&records, &array![1.0, 2.0]),
            Err(FlcoxError::NoComparablePairs)
        ));
    }

    #[test]
    fn concordance_matches_brute_force_pairs() {
        use rand::rngs::StdRng;
        use rand::{Rng, SeedableRng};
        let mut rng = StdRng::seed_from_u64(2024);
        for _ in 0..5 {
            let n = 50;
            let records: Vec<SurvivalRecord> = (0..n)
                .map(|i| {
                    // discrete times force ties; mixed censoring
                    let t = rng.gen_range(1..=8) as f64;
                    rec(t, u8::from(rng.gen_bool(0.6)), i)
                })
                .collect();
            let risk = Array1::from_shape_fn(n, |_| rng.gen_range(-2.0..2.0f64).round());
            let got = concordance(&records, &risk);
            // independent O(n^2) loop over ordered pairs
            let mut conc = 0.0;
            let mut comp = 0u64;
            for i in 0..n {
                for j in 0..n {
                    if i == j {
                        continue;
                    }
                    if records[i].is_event() && records[i].time < records[j].time {
                        comp += 1;
                        if risk[i] > risk[j] {
                            conc += 1.0;
                        } else if risk[i] == risk[j] {
                            conc += 0.5;
                        }
                    }
                }
            }
            match got {
                Ok(c) => assert_abs_diff_eq!(c, conc / comp as f64, epsilon = 0.0),
                Err(_) => assert_eq!(comp, 0),
            }
        }
    }

    #[test]
    fn concordance_invariant_under_monotone_transforms() {
        use rand::rngs::StdRng;
        use rand::{Rng, SeedableRng};
        let mut rng = StdRng::seed_from_u64(9);
        let n = 40;
        let records: Vec<SurvivalRecord> = (0..n)
            .map(|i| rec(rng.gen_range(0.5..4.0), u8::from(rng.gen_bool(0.7)), i))
            .collect();
        let risk = Array1::from_shape_fn(n, |_| rng.gen_range(-1.5..1.5));
        let base = concordance(&records, &risk).unwrap();
        let exp = concordance(&records, &risk.mapv(f64::exp)).unwrap();
        let affine = concordance(&records, &risk.mapv(|v| 3.0 * v + 7.0)).unwrap();
        assert_abs_diff_eq!(base, exp, epsilon = 1e-15);
        assert_abs_diff_eq!(base, affine, epsilon = 1e-15);
    }
}
