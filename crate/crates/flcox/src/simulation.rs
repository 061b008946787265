//! Monte Carlo study: functional predictors with a Karhunen-Loeve-type
//! expansion, correlated scalar covariates, gamma frailty, exponential failure
//! and censoring times, replication harness, and the Case-II tabular frailty
//! augmentation.

use crate::error::{FlcoxError, Result};
use crate::grid::SamplingGrid;
use crate::inference::{concordance, imse_beta, mse_gamma, MetricsRecord};
use crate::pipeline::{fit_pipeline, project_new_curves, FunctionalCoxDataset, PipelineConfig};
use crate::smoothing::RawCurves;
use crate::survival::SurvivalRecord;
use ndarray::{Array1, Array2};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Gamma, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Harmonic pairs in the functional-predictor expansion.
const N_HARMONICS: usize = 10;
/// Measurement-error variance added at every grid point.
const NOISE_VARIANCE: f64 = 0.5;

/// Settings for one simulation cell.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimConfig {
    pub n: usize,
    /// Censoring rate parameter; 0 disables censoring.
    pub tau: f64,
    /// Frailty variance of the gamma generator.
    pub phi: f64,
    /// Scalar-covariate AR correlation.
    pub rho: f64,
    /// Grid size on [0, 1].
    pub j_points: usize,
    pub n_test: usize,
    pub replications: usize,
    pub seed: u64,
    pub fpca_threshold: f64,
    /// Use the noisy rather than the noise-free curves in the hazard integral.
    pub hazard_uses_noisy_curves: bool,
    /// Also fit the no-frailty reduction each replication.
    pub fit_no_frailty: bool,
}

impl SimConfig {
    pub fn new(n: usize, tau: f64, phi: f64) -> Self {
        Self {
            n,
            tau,
            phi,
            rho: 0.5,
            j_points: 101,
            n_test: n,
            replications: 100,
            seed: 1,
            fpca_threshold: 0.85,
            hazard_uses_noisy_curves: false,
            fit_no_frailty: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 20 {
            return Err(FlcoxError::InvalidInput(format!(
                "sample size must be at least 20, got {}",
                self.n
            )));
        }
        if self.tau < 0.0 || !(self.phi > 0.0) || !(0.0..1.0).contains(&self.rho) {
            return Err(FlcoxError::InvalidInput(
                "need tau >= 0, phi > 0, 0 <= rho < 1".into(),
            ));
        }
        Ok(())
    }
}

/// True parameter values of the study design.
#[derive(Debug, Clone)]
pub struct TruthSpec {
    pub gamma_true: Array1<f64>,
    pub beta_true: Array1<f64>,
    pub grid: SamplingGrid,
}

impl TruthSpec {
    pub fn on_grid(grid: SamplingGrid) -> Self {
        let beta_true = beta_true_eval(&grid);
        Self {
            gamma_true: Array1::from_elem(6, 0.5),
            beta_true,
            grid,
        }
    }
}

/// The study's functional coefficient evaluated on a grid in [0, 1].
pub fn beta_true_eval(grid: &SamplingGrid) -> Array1<f64> {
    grid.points().mapv(beta_true_at)
}

pub fn beta_true_at(s: f64) -> f64 {
    use std::f64::consts::PI;
    0.3 * ((PI * s).sin() - (PI * s).cos() + (3.0 * PI * s / 10.0).sin() - (3.0 * PI * s).cos()
        + (5.0 * PI * s).sin() / 9.0
        - (5.0 * PI * s).cos() / 9.0
        + (7.0 * PI * s).sin() / 16.0
        - (7.0 * PI * s).cos() / 16.0
        + (9.0 * PI * s).sin() / 25.0
        + (9.0 * PI * s).cos() / 25.0
        + (2.0 * PI).powf(-0.5) * (-0.5 * (s - 0.5) * (s - 0.5)).exp())
}

/// Random coefficients of one functional predictor draw.
#[derive(Debug, Clone)]
pub struct CurveCoefficients {
    pub intercept: f64,
    pub slope: f64,
    /// (sine, cosine) coefficient per harmonic pair.
    pub harmonics: Vec<(f64, f64)>,
}

impl CurveCoefficients {
    pub fn zero() -> Self {
        Self {
            intercept: 0.0,
            slope: 0.0,
            harmonics: vec![(0.0, 0.0); N_HARMONICS],
        }
    }

    pub fn draw<R: Rng>(rng: &mut R) -> Self {
        let intercept: f64 = StandardNormal.sample(rng);
        let slope: f64 = StandardNormal.sample(rng);
        let harmonics = (1..=N_HARMONICS)
            .map(|j| {
                let sd = 1.0 / j as f64;
                let a: f64 = StandardNormal.sample(rng);
                let b: f64 = StandardNormal.sample(rng);
                (sd * a, sd * b)
            })
            .collect();
        Self {
            intercept,
            slope,
            harmonics,
        }
    }

    /// Evaluate the expansion on a grid: intercept + slope*s plus odd
    /// harmonics sin((2j-1) pi s), cos((2j-1) pi s).
    pub fn evaluate(&self, grid: &SamplingGrid) -> Array1<f64> {
        use std::f64::consts::PI;
        grid.points().mapv(|s| {
            let mut v = self.intercept + self.slope * s;
            for (j, &(a, b)) in self.harmonics.iter().enumerate() {
                let freq = (2 * (j + 1) - 1) as f64 * PI;
                v += a * (freq * s).sin() + b * (freq * s).cos();
            }
            v
        })
    }
}

/// Generated functional predictors: noise-free curves, noisy observations,
/// and the leading sine coefficient used to correlate Z with the predictor.
pub struct GeneratedCurves {
    pub true_curves: Array2<f64>,
    pub noisy_curves: Array2<f64>,
    pub v11: Array1<f64>,
}

pub fn gen_functional_predictor<R: Rng>(
    n: usize,
    grid: &SamplingGrid,
    rng: &mut R,
) -> GeneratedCurves {
    let j = grid.len();
    let mut true_curves = Array2::zeros((n, j));
    let mut noisy_curves = Array2::zeros((n, j));
    let mut v11 = Array1::zeros(n);
    let noise_sd = NOISE_VARIANCE.sqrt();
    for i in 0..n {
        let coef = CurveCoefficients::draw(rng);
        v11[i] = coef.harmonics[0].0;
        let curve = coef.evaluate(grid);
        for c in 0..j {
            let eps: f64 = StandardNormal.sample(rng);
            true_curves[[i, c]] = curve[c];
            noisy_curves[[i, c]] = curve[c] + noise_sd * eps;
        }
    }
    GeneratedCurves {
        true_curves,
        noisy_curves,
        v11,
    }
}

/// Scalar covariates jointly normal with the leading curve coefficient:
/// AR(rho) marginal block and Cov(z_k, v11) = 0.1, realized by conditioning
/// on the already-drawn v11.
pub fn gen_scalar_covariates<R: Rng>(
    n: usize,
    rho: f64,
    v11: &Array1<f64>,
    rng: &mut R,
) -> Result<Array2<f64>> {
    let p = 6;
    let mut sigma = Array2::zeros((p, p));
    for a in 0..p {
        for b in 0..p {
            sigma[[a, b]] = rho.powi((a as i32 - b as i32).abs());
        }
    }
    // conditional covariance given v11 (unit variance): Sigma - 0.01 * ones
    let mut cond = sigma;
    for a in 0..p {
        for b in 0..p {
            cond[[a, b]] -= 0.01;
        }
    }
    let na = nalgebra::DMatrix::from_fn(p, p, |a, b| cond[[a, b]]);
    let l = na
        .cholesky()
        .ok_or_else(|| {
            FlcoxError::InvalidInput("conditional covariance of Z is not positive definite".into())
        })?
        .l();
    let mut z = Array2::zeros((n, p));
    for i in 0..n {
        let eps: Vec<f64> = (0..p).map(|_| StandardNormal.sample(rng)).collect();
        for a in 0..p {
            let mut v = 0.1 * v11[i];
            for b in 0..=a {
                v += l[(a, b)] * eps[b];
            }
            z[[i, a]] = v;
        }
    }
    Ok(z)
}

/// I.i.d. gamma frailties with mean 1 and variance phi.
pub fn gen_frailty<R: Rng>(n: usize, phi: f64, rng: &mut R) -> Result<Array1<f64>> {
    if !(phi > 0.0) {
        return Err(FlcoxError::InvalidInput("phi must be positive".into()));
    }
    let gamma = Gamma::new(1.0 / phi, phi)
        .map_err(|e| FlcoxError::InvalidInput(format!("gamma frailty: {e}")))?;
    Ok(Array1::from_iter((0..n).map(|_| gamma.sample(rng))))
}

/// Exponential survival and censoring times under the multiplicative gamma
/// frailty convention: the hazard rate is w * exp(Z gamma + integral X beta),
/// i.e. the frailty enters the linear predictor as log w.
pub fn gen_survival<R: Rng>(
    z: &Array2<f64>,
    curves: &Array2<f64>,
    w: &Array1<f64>,
    truth: &TruthSpec,
    tau: f64,
    grid: &SamplingGrid,
    rng: &mut R,
) -> Vec<SurvivalRecord> {
    let n = z.nrows();
    let mut records = Vec::with_capacity(n);
    for i in 0..n {
        let integral = grid.inner(&curves.row(i).to_owned(), &truth.beta_true);
        let eta = z.row(i).dot(&truth.gamma_true) + integral + w[i].ln();
        let e1: f64 = Exp1.sample(rng);
        let t = e1 / eta.exp();
        let (time, status) = if tau > 0.0 {
            let e2: f64 = Exp1.sample(rng);
            let c = e2 / tau;
            if t < c {
                (t, 1)
            } else {
                (c, 0)
            }
        } else {
            (t, 1)
        };
        // group i: unshared frailty
        records.push(SurvivalRecord {
            time: time.max(f64::MIN_POSITIVE),
            status,
            group: i,
        });
    }
    records
}

/// One generated train/test pair.
pub struct GeneratedStudyData {
    pub train: FunctionalCoxDataset,
    pub train_truth_eta: Array1<f64>,
    pub test: FunctionalCoxDataset,
}

/// Generate a full train + test draw for one replication.
pub fn generate_study_data(config: &SimConfig, truth: &TruthSpec, rng: &mut ChaCha8Rng) -> Result<GeneratedStudyData> {
    let grid = &truth.grid;
    let make = |n: usize, rng: &mut ChaCha8Rng| -> Result<(FunctionalCoxDataset, Array1<f64>)> {
        let curves = gen_functional_predictor(n, grid, rng);
        let z = gen_scalar_covariates(n, config.rho, &curves.v11, rng)?;
        let w = gen_frailty(n, config.phi, rng)?;
        let hazard_curves = if config.hazard_uses_noisy_curves {
            &curves.noisy_curves
        } else {
            &curves.true_curves
        };
        let records = gen_survival(&z, hazard_curves, &w, truth, config.tau, grid, rng);
        let mut eta = Array1::zeros(n);
        for i in 0..n {
            eta[i] = z.row(i).dot(&truth.gamma_true)
                + grid.inner(&hazard_curves.row(i).to_owned(), &truth.beta_true)
                + w[i].ln();
        }
        Ok((
            FunctionalCoxDataset {
                grid: grid.clone(),
                curves: RawCurves::new(curves.noisy_curves)?,
                records,
                z,
            },
            eta,
        ))
    };
    let (train, train_truth_eta) = make(config.n, rng)?;
    let (test, _) = make(config.n_test, rng)?;
    Ok(GeneratedStudyData {
        train,
        train_truth_eta,
        test,
    })
}

/// Metrics of one replication, for the frailty fit and optionally the
/// no-frailty reduction.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReplicationRecord {
    pub replicate: usize,
    pub metrics: MetricsRecord,
    pub k_selected: usize,
    pub converged: bool,
    pub alpha_hat: f64,
    pub no_frailty: Option<MetricsRecord>,
}

/// Run one full replication: generate, smooth, project, fit, score.
pub fn run_replication(
    config: &SimConfig,
    truth: &TruthSpec,
    replicate: usize,
) -> Result<ReplicationRecord> {
    run_replication_stream(config, truth, replicate, replicate as u64)
}

/// Replication with an explicit RNG substream, so studies can key streams by
/// (cell, replicate) without colliding across cells.
pub fn run_replication_stream(
    config: &SimConfig,
    truth: &TruthSpec,
    replicate: usize,
    stream: u64,
) -> Result<ReplicationRecord> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(stream);
    let data = generate_study_data(config, truth, &mut rng)?;

    let pipeline_config = PipelineConfig {
        fpca_threshold: config.fpca_threshold,
        ..PipelineConfig::default()
    };
    let fitted = fit_pipeline(&data.train, &pipeline_config)?;
    let metrics = replication_metrics(&fitted, &data, truth)?;

    let no_frailty = if config.fit_no_frailty {
        let mut nf_config = pipeline_config.clone();
        nf_config.frailty.frailty_enabled = false;
        let nf = fit_pipeline(&data.train, &nf_config)?;
        Some(replication_metrics(&nf, &data, truth)?)
    } else {
        None
    };

    Ok(ReplicationRecord {
        replicate,
        metrics,
        k_selected: fitted.fpca.k,
        converged: fitted.fit.diagnostics.converged,
        alpha_hat: fitted.fit.alpha_hat.unwrap_or(f64::NAN),
        no_frailty,
    })
}

fn replication_metrics(
    fitted: &crate::pipeline::PipelineFit,
    data: &GeneratedStudyData,
    truth: &TruthSpec,
) -> Result<MetricsRecord> {
    let train = &data.train;
    // in-sample risk includes the fitted frailty effects
    let groups: Vec<usize> = train.records.iter().map(|r| r.group).collect();
    let eta_in = if fitted.fit.w_hat.is_empty() {
        crate::frailty::predict_risk(&fitted.fit, &train.z, fitted.design.scores(), None)?
    } else {
        crate::frailty::predict_risk(&fitted.fit, &train.z, fitted.design.scores(), Some(&groups))?
    };
    let ci_in = concordance(&train.records, &eta_in)?;

    // out-of-sample risk excludes frailty: new subjects carry the prior mean
    let test_scores = project_new_curves(fitted, &data.test.curves, 1e-8)?;
    let eta_out = crate::frailty::predict_risk(&fitted.fit, &data.test.z, &test_scores, None)?;
    let ci_out = concordance(&data.test.records, &eta_out)?;

    let p = truth.gamma_true.len() as f64;
    let mse = mse_gamma(&fitted.fit.gamma_hat, &truth.gamma_true)? / p;
    let imse = imse_beta(&fitted.beta, &truth.beta_true)?;
    let censored = train.records.iter().filter(|r| !r.is_event()).count();
    Ok(MetricsRecord {
        ci_in,
        ci_out,
        mse_gamma: mse,
        imse_beta: imse,
        censor_rate: censored as f64 / train.records.len() as f64,
    })
}

/// Per-cell aggregate of a study: means and standard errors of every metric.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StudyCell {
    pub tau: f64,
    pub phi: f64,
    pub n: usize,
    pub method: String,
    pub ci_in: f64,
    pub ci_out: f64,
    pub mse: f64,
    pub imse: f64,
    pub psi: f64,
    pub se_ci_in: f64,
    pub se_ci_out: f64,
    pub se_mse: f64,
    pub se_imse: f64,
    pub se_psi: f64,
    pub replications: usize,
}

fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn aggregate(cell: &SimConfig, method: &str, metrics: &[MetricsRecord], reps: usize) -> StudyCell {
    let pull = |f: fn(&MetricsRecord) -> f64| -> (f64, f64) {
        let values: Vec<f64> = metrics.iter().map(f).collect();
        mean_se(&values)
    };
    let (ci_in, se_ci_in) = pull(|m| m.ci_in);
    let (ci_out, se_ci_out) = pull(|m| m.ci_out);
    let (mse, se_mse) = pull(|m| m.mse_gamma);
    let (imse, se_imse) = pull(|m| m.imse_beta);
    let (psi, se_psi) = pull(|m| m.censor_rate);
    StudyCell {
        tau: cell.tau,
        phi: cell.phi,
        n: cell.n,
        method: method.to_string(),
        ci_in,
        ci_out,
        mse,
        imse,
        psi,
        se_ci_in,
        se_ci_out,
        se_mse,
        se_imse,
        se_psi,
        replications: reps,
    }
}

/// Full study output: per-cell aggregates plus the per-replication log.
#[derive(Debug, Clone)]
pub struct StudyResult {
    pub cells: Vec<StudyCell>,
    pub replications: Vec<(SimConfig, ReplicationRecord)>,
}

/// Run a grid of simulation cells. Replications run in parallel; each takes
/// an independent RNG substream keyed by (cell index, replicate index), so
/// parallel and serial runs agree.
pub fn run_study(cells: &[SimConfig]) -> Result<StudyResult> {
    if cells.is_empty() {
        return Err(FlcoxError::InvalidInput("empty study grid".into()));
    }
    let mut out_cells = Vec::new();
    let mut all_reps = Vec::new();
    for (cell_idx, cell) in cells.iter().enumerate() {
        cell.validate()?;
        let grid = SamplingGrid::equidistant(0.0, 1.0, cell.j_points)?;
        let truth = TruthSpec::on_grid(grid);
        // non-overlapping stream ids across cells
        let reps: Vec<ReplicationRecord> = (0..cell.replications)
            .into_par_iter()
            .map(|rep| {
                let stream = ((cell_idx as u64) << 32) | rep as u64;
                run_replication_stream(cell, &truth, rep, stream)
            })
            .collect::<Result<Vec<_>>>()?;
        let frailty_metrics: Vec<MetricsRecord> = reps.iter().map(|r| r.metrics).collect();
        out_cells.push(aggregate(cell, "flcrm-f", &frailty_metrics, reps.len()));
        if cell.fit_no_frailty {
            let nf: Vec<MetricsRecord> = reps.iter().filter_map(|r| r.no_frailty).collect();
            out_cells.push(aggregate(cell, "flcrm", &nf, reps.len()));
        }
        all_reps.extend(reps.into_iter().map(|r| (cell.clone(), r)));
    }
    Ok(StudyResult {
        cells: out_cells,
        replications: all_reps,
    })
}

/// A tabular subject row for the Case-II frailty augmentation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AugmentRow {
    pub age: f64,
    pub bmi: f64,
    pub chd: u8,
    pub race: String,
    pub time: f64,
}

/// Additive score weights for the augmentation; race increments are keyed by
/// lowercase category name. The defaults are configuration choices, not
/// published values.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScoreWeights {
    pub age_over_65: f64,
    pub bmi_extreme: f64,
    pub chd: f64,
    pub race_increments: BTreeMap<String, f64>,
}

impl Default for ScoreWeights {
    fn default() -> Self {
        let mut race_increments = BTreeMap::new();
        race_increments.insert("non-hispanic black".to_string(), 2.0);
        race_increments.insert("mexican american".to_string(), 2.0);
        Self {
            age_over_65: 2.0,
            bmi_extreme: 2.0,
            chd: 3.0,
            race_increments,
        }
    }
}

/// Survival-time shrinkage thresholds: scores at or above `moderate` scale
/// time by `moderate_scale`; scores at or above `severe` supersede with
/// `severe_scale`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AugmentThresholds {
    pub moderate: f64,
    pub moderate_scale: f64,
    pub severe: f64,
    pub severe_scale: f64,
}

impl Default for AugmentThresholds {
    fn default() -> Self {
        Self {
            moderate: 5.0,
            moderate_scale: 0.4,
            severe: 7.0,
            severe_scale: 0.2,
        }
    }
}

/// Score each row and shrink survival times in the high-frailty strata.
/// Returns the modified rows with their scores.
pub fn frailty_augment(
    rows: &[AugmentRow],
    weights: &ScoreWeights,
    thresholds: &AugmentThresholds,
) -> Result<Vec<(AugmentRow, f64)>> {
    rows.iter()
        .map(|row| {
            if !(row.time > 0.0) {
                return Err(FlcoxError::InvalidInput(format!(
                    "augment requires positive times, got {}",
                    row.time
                )));
            }
            let mut score = 0.0;
            if row.age > 65.0 {
                score += weights.age_over_65;
            }
            if row.bmi > 40.0 || row.bmi < 18.5 {
                score += weights.bmi_extreme;
            }
            if row.chd == 1 {
                score += weights.chd;
            }
            if let Some(inc) = weights.race_increments.get(&row.race.to_lowercase()) {
                score += inc;
            }
            let mut out = row.clone();
            if score >= thresholds.severe {
                out.time *= thresholds.severe_scale;
            } else if score >= thresholds.moderate {
                out.time *= thresholds.moderate_scale;
            }
            Ok((out, score))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn grid101() -> SamplingGrid {
        SamplingGrid::equidistant(0.0, 1.0, 101).unwrap()
    }

    #[test]
    fn beta_true_frozen_values() {
        // frozen from a 30-digit evaluation of the closed form
        assert_abs_diff_eq!(beta_true_at(0.0), -0.53446373530404349, epsilon = 1e-14);
        assert_abs_diff_eq!(beta_true_at(0.5), 0.58246316737562717, epsilon = 1e-14);
        assert_abs_diff_eq!(beta_true_at(1.0), 0.98840802967510740, epsilon = 1e-14);
    }

    #[test]
    fn beta_bump_peaks_at_center() {
        // the Gaussian term alone peaks at 0.5 with value 0.3 / sqrt(2 pi)
        let bump = |s: f64| 0.3 * (2.0 * std::f64::consts::PI).powf(-0.5)
            * (-0.5 * (s - 0.5) * (s - 0.5)).exp();
        assert_abs_diff_eq!(bump(0.5), 0.11968268412042980, epsilon = 1e-15);
        assert!(bump(0.4) < bump(0.5) && bump(0.6) < bump(0.5));
    }

    #[test]
    fn beta_integral_stable_under_refinement() {
        let coarse = grid101();
        let fine = SamplingGrid::equidistant(0.0, 1.0, 1001).unwrap();
        let b1 = beta_true_eval(&coarse);
        let b2 = beta_true_eval(&fine);
        let i1 = coarse.inner(&b1, &b1);
        let i2 = fine.inner(&b2, &b2);
        assert!(((i1 - i2) / i2).abs() < 1e-4, "{i1} vs {i2}");
    }

    #[test]
    fn zero_coefficients_give_zero_curve() {
        let curve = CurveCoefficients::zero().evaluate(&grid101());
        assert!(curve.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn predictor_variance_at_zero_matches_analytic() {
        // Var X(0) = Var(u1) + sum_j Var(v_j2) = 1 + sum_j j^-2
        let grid = grid101();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let n = 10_000;
        let gen = gen_functional_predictor(n, &grid, &mut rng);
        let col: Vec<f64> = (0..n).map(|i| gen.true_curves[[i, 0]]).collect();
        let mean = col.iter().sum::<f64>() / n as f64;
        let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
        let analytic: f64 = 1.0 + (1..=10).map(|j| 1.0 / (j * j) as f64).sum::<f64>();
        assert!(
            (var - analytic).abs() / analytic < 0.05,
            "sample {var} vs analytic {analytic}"
        );
    }

    #[test]
    fn noise_variance_matches_spec() {
        let grid = grid101();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let gen = gen_functional_predictor(100, &grid, &mut rng);
        let diff = &gen.noisy_curves - &gen.true_curves;
        let m = diff.mean().unwrap();
        let var = diff.mapv(|v| (v - m) * (v - m)).mean().unwrap();
        assert!((var - 0.5).abs() / 0.5 < 0.05, "noise variance {var}");
    }

    #[test]
    fn scalar_covariate_moments() {
        let n = 10_000;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        // rho = 0: Sigma_Z = I, cross-covariance with v11 still 0.1
        let v11 = Array1::from_iter((0..n).map(|_| {
            let v: f64 = StandardNormal.sample(&mut rng);
            v
        }));
        let z = gen_scalar_covariates(n, 0.0, &v11, &mut rng).unwrap();
        for k in 0..6 {
            let cov = (0..n)
                .map(|i| z[[i, k]] * v11[i])
                .sum::<f64>()
                / n as f64;
            assert!((cov - 0.1).abs() < 0.03, "cov(z{k}, v11) = {cov}");
        }
        // rho = 0.5: Corr(z1, z2) about 0.5
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let v11 = Array1::from_iter((0..n).map(|_| {
            let v: f64 = StandardNormal.sample(&mut rng);
            v
        }));
        let z = gen_scalar_covariates(n, 0.5, &v11, &mut rng).unwrap();
        let mean: Vec<f64> = (0..2)
            .map(|k| (0..n).map(|i| z[[i, k]]).sum::<f64>() / n as f64)
            .collect();
        let var: Vec<f64> = (0..2)
            .map(|k| {
                (0..n)
                    .map(|i| (z[[i, k]] - mean[k]).powi(2))
                    .sum::<f64>()
                    / n as f64
            })
            .collect();
        let cov = (0..n)
            .map(|i| (z[[i, 0]] - mean[0]) * (z[[i, 1]] - mean[1]))
            .sum::<f64>()
            / n as f64;
        let corr = cov / (var[0] * var[1]).sqrt();
        assert!((corr - 0.5).abs() < 0.03, "corr(z1, z2) = {corr}");
    }

    #[test]
    fn conditional_covariance_with_zero_v11() {
        // v11 = 0: Z marginal covariance equals Sigma_Z - 0.01 * ones
        let n = 10_000;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let v11 = Array1::zeros(n);
        let z = gen_scalar_covariates(n, 0.5, &v11, &mut rng).unwrap();
        let mean: Vec<f64> = (0..6)
            .map(|k| (0..n).map(|i| z[[i, k]]).sum::<f64>() / n as f64)
            .collect();
        for a in 0..3 {
            for b in 0..3 {
                let cov = (0..n)
                    .map(|i| (z[[i, a]] - mean[a]) * (z[[i, b]] - mean[b]))
                    .sum::<f64>()
                    / n as f64;
                let expected = 0.5f64.powi((a as i32 - b as i32).abs()) - 0.01;
                assert!(
                    (cov - expected).abs() < 0.05,
                    "cov(z{a}, z{b}) = {cov}, expected {expected}"
                );
            }
        }
    }

    #[test]
    fn gamma_frailty_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let w = gen_frailty(100_000, 1.0, &mut rng).unwrap();
        let mean = w.mean().unwrap();
        assert!((0.99..=1.01).contains(&mean), "mean {mean}");
        let w = gen_frailty(100_000, 2.0, &mut rng).unwrap();
        let m = w.mean().unwrap();
        let var = w.mapv(|v| (v - m) * (v - m)).sum() / (w.len() - 1) as f64;
        assert!((var - 2.0).abs() / 2.0 < 0.05, "variance {var}");
        // small variance concentrates near 1
        let w = gen_frailty(100_000, 0.01, &mut rng).unwrap();
        let m = w.mean().unwrap();
        let sd = (w.mapv(|v| (v - m) * (v - m)).sum() / (w.len() - 1) as f64).sqrt();
        assert!((sd - 0.1).abs() < 0.01, "sd {sd}");
    }

    #[test]
    fn no_censoring_when_tau_zero() {
        let grid = grid101();
        let truth = TruthSpec::on_grid(grid.clone());
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let gen = gen_functional_predictor(50, &grid, &mut rng);
        let z = gen_scalar_covariates(50, 0.5, &gen.v11, &mut rng).unwrap();
        let w = gen_frailty(50, 1.0, &mut rng).unwrap();
        let records = gen_survival(&z, &gen.true_curves, &w, &truth, 0.0, &grid, &mut rng);
        assert!(records.iter().all(|r| r.is_event()));
    }

    #[test]
    fn competing_exponentials_event_probability() {
        // eta = 0 (zero covariates, unit frailty), tau = 1: P(event) = 1/2
        let grid = grid101();
        let truth = TruthSpec {
            gamma_true: Array1::zeros(6),
            beta_true: Array1::zeros(101),
            grid: grid.clone(),
        };
        let n = 100_000;
        let z = Array2::zeros((n, 6));
        let curves = Array2::zeros((n, 101));
        let w = Array1::ones(n);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let records = gen_survival(&z, &curves, &w, &truth, 1.0, &grid, &mut rng);
        let frac = records.iter().filter(|r| r.is_event()).count() as f64 / n as f64;
        assert!((0.49..=0.51).contains(&frac), "event fraction {frac}");
    }

    #[test]
    fn event_times_follow_unit_exponential_at_null_predictor() {
        // two-sided KS distance < 0.02 at 1e5 draws
        let grid = grid101();
        let truth = TruthSpec {
            gamma_true: Array1::zeros(6),
            beta_true: Array1::zeros(101),
            grid: grid.clone(),
        };
        let n = 100_000;
        let z = Array2::zeros((n, 6));
        let curves = Array2::zeros((n, 101));
        let w = Array1::ones(n);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let records = gen_survival(&z, &curves, &w, &truth, 0.0, &grid, &mut rng);
        let mut times: Vec<f64> = records.iter().map(|r| r.time).collect();
        times.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut ks: f64 = 0.0;
        for (i, t) in times.iter().enumerate() {
            let empirical_hi = (i + 1) as f64 / n as f64;
            let empirical_lo = i as f64 / n as f64;
            let model = 1.0 - (-t).exp();
            ks = ks.max((empirical_hi - model).abs()).max((empirical_lo - model).abs());
        }
        assert!(ks < 0.02, "KS distance {ks}");
    }

    #[test]
    fn replication_is_deterministic() {
        let mut config = SimConfig::new(60, 0.1, 1.0);
        config.replications = 1;
        config.seed = 99;
        config.n_test = 60;
        let grid = grid101();
        let truth = TruthSpec::on_grid(grid);
        let a = run_replication(&config, &truth, 3).unwrap();
        let b = run_replication(&config, &truth, 3).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
        let c = run_replication(&config, &truth, 4).unwrap();
        assert_ne!(
            serde_json::to_string(&a.metrics).unwrap(),
            serde_json::to_string(&c.metrics).unwrap()
        );
    }

    #[test]
    fn augment_examples() {
        let weights = ScoreWeights::default();
        let thresholds = AugmentThresholds::default();
        let base = AugmentRow {
            age: 40.0,
            bmi: 25.0,
            chd: 0,
            race: "Non-Hispanic White".into(),
            time: 10.0,
        };
        // score 0: unchanged
        let out = frailty_augment(&[base.clone()], &weights, &thresholds).unwrap();
        assert_abs_diff_eq!(out[0].0.time, 10.0, epsilon = 1e-15);
        assert_abs_diff_eq!(out[0].1, 0.0, epsilon = 1e-15);
        // score 5 (age 2 + CHD 3): time 10 -> 4
        let row = AugmentRow {
            age: 70.0,
            chd: 1,
            ..base.clone()
        };
        let out = frailty_augment(&[row], &weights, &thresholds).unwrap();
        assert_abs_diff_eq!(out[0].1, 5.0, epsilon = 1e-15);
        assert_abs_diff_eq!(out[0].0.time, 4.0, epsilon = 1e-12);
        // score 7 (age 2 + BMI 2 + CHD 3): time 10 -> 2, severe supersedes
        let row = AugmentRow {
            age: 70.0,
            bmi: 45.0,
            chd: 1,
            ..base.clone()
        };
        let out = frailty_augment(&[row], &weights, &thresholds).unwrap();
        assert_abs_diff_eq!(out[0].1, 7.0, epsilon = 1e-15);
        assert_abs_diff_eq!(out[0].0.time, 2.0, epsilon = 1e-12);
        // race increment applies case-insensitively
        let row = AugmentRow {
            race: "Mexican American".into(),
            ..base
        };
        let out = frailty_augment(&[row], &weights, &thresholds).unwrap();
        assert_abs_diff_eq!(out[0].1, 2.0, epsilon = 1e-15);
        // negative time refused
        let bad = AugmentRow {
            age: 40.0,
            bmi: 25.0,
            chd: 0,
            race: "x".into(),
            time: -1.0,
        };
        assert!(frailty_augment(&[bad], &weights, &thresholds).is_err());
    }
}
