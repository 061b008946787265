//! End-to-end pipeline: smooth raw curves, project onto FPCs, fit the
//! frailty Cox model, and reconstruct the coefficient function. Shared by the
//! CLI, the simulation study, and the bootstrap.

use crate::bspline::{build_bspline_basis, BSplineBasis};
use crate::error::{FlcoxError, Result};
use crate::fpca::{compute_scores, eigendecompose, empirical_covariance, FpcaBasis};
use crate::frailty::{fit, FrailtyFit};
use crate::grid::SamplingGrid;
use crate::inference::{reconstruct_beta, BootstrapBeta, CoefficientFunction};
use crate::smoothing::{smooth_curves, RawCurves, SmoothedCurves};
use crate::survival::{CoxDesign, FrailtyConfig, SurvivalRecord};
use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// A complete functional survival dataset before smoothing/FPCA.
#[derive(Debug, Clone)]
pub struct FunctionalCoxDataset {
    pub grid: SamplingGrid,
    pub curves: RawCurves,
    pub records: Vec<SurvivalRecord>,
    pub z: Array2<f64>,
}

impl FunctionalCoxDataset {
    pub fn n(&self) -> usize {
        self.records.len()
    }

    /// Subset by subject indices (with repetition), regrouping unshared
    /// frailty indices so every resampled subject is its own group.
    pub fn resample(&self, indices: &[usize]) -> Self {
        let j = self.grid.len();
        let mut curves = Array2::zeros((indices.len(), j));
        let mut z = Array2::zeros((indices.len(), self.z.ncols()));
        let mut records = Vec::with_capacity(indices.len());
        for (row, &i) in indices.iter().enumerate() {
            curves.row_mut(row).assign(&self.curves.values().row(i));
            z.row_mut(row).assign(&self.z.row(i));
            let mut r = self.records[i];
            r.group = row;
            records.push(r);
        }
        Self {
            grid: self.grid.clone(),
            curves: RawCurves::new(curves).expect("resample of a valid dataset"),
            records,
            z,
        }
    }
}

/// Pipeline-level knobs: smoothing basis, FPCA truncation, fit settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub n_basis: usize,
    pub spline_order: usize,
    pub ridge: f64,
    pub fpca_threshold: f64,
    pub frailty: FrailtyConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            n_basis: 20,
            spline_order: 4,
            ridge: 1e-8,
            fpca_threshold: 0.85,
            frailty: FrailtyConfig::default(),
        }
    }
}

/// Everything produced by one pipeline run.
pub struct PipelineFit {
    pub basis: BSplineBasis,
    pub smoothed: SmoothedCurves,
    pub fpca: FpcaBasis,
    pub design: CoxDesign,
    pub fit: FrailtyFit,
    pub beta: CoefficientFunction,
}

/// Run smooth -> center -> FPCA -> score -> fit -> reconstruct.
pub fn fit_pipeline(dataset: &FunctionalCoxDataset, config: &PipelineConfig) -> Result<PipelineFit> {
    let basis = build_bspline_basis(&dataset.grid, config.spline_order, config.n_basis)?;
    let smoothed = smooth_curves(&dataset.curves, &basis, config.ridge)?;
    let cov = empirical_covariance(&smoothed, &dataset.grid)?;
    let mut fpca = eigendecompose(&cov)?;
    fpca.truncate(config.fpca_threshold)?;
    let scores = compute_scores(&smoothed.centered, &fpca, &dataset.grid);
    let design = CoxDesign::new(dataset.records.clone(), dataset.z.clone(), scores)?;
    let fit = fit(&design, &config.frailty)?;
    let beta = reconstruct_beta(&fit.beta_coef_hat, &fpca)?;
    Ok(PipelineFit {
        basis,
        smoothed,
        fpca,
        design,
        fit,
        beta,
    })
}

/// Project out-of-sample curves onto a fitted pipeline's FPC basis, centering
/// with the training mean curve.
pub fn project_new_curves(fit: &PipelineFit, curves: &RawCurves, ridge: f64) -> Result<Array2<f64>> {
    let smoothed = smooth_curves(curves, &fit.basis, ridge)?;
    let centered = &smoothed.fitted - &fit.smoothed.mean_curve.view().insert_axis(Axis(0));
    Ok(compute_scores(&centered, &fit.fpca, fit.fpca.grid()))
}

/// Bootstrap the coefficient function: B resamples with replacement, full
/// pipeline rerun per resample. Replicates whose resample carries no events
/// are skipped and counted.
pub fn bootstrap_beta(
    dataset: &FunctionalCoxDataset,
    config: &PipelineConfig,
    b: usize,
    seed: u64,
) -> Result<BootstrapBeta> {
    if b == 0 {
        return Err(FlcoxError::InvalidInput("bootstrap needs B >= 1".into()));
    }
    let n = dataset.n();
    let index_sets: Vec<Vec<usize>> = (0..b)
        .map(|rep| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(rep as u64 + 1);
            (0..n).map(|_| rng.gen_range(0..n)).collect()
        })
        .collect();
    bootstrap_beta_with_indices(dataset, config, &index_sets)
}

/// Deterministic-index variant backing `bootstrap_beta`; exposed for callers
/// that need reproducible resample plans (and for the identity-resample test).
pub fn bootstrap_beta_with_indices(
    dataset: &FunctionalCoxDataset,
    config: &PipelineConfig,
    index_sets: &[Vec<usize>],
) -> Result<BootstrapBeta> {
    let results: Vec<Option<Array1<f64>>> = index_sets
        .par_iter()
        .map(|indices| {
            let resampled = dataset.resample(indices);
            match fit_pipeline(&resampled, config) {
                Ok(p) => Some(p.beta.values),
                Err(FlcoxError::NoEvents) => None,
                Err(_) => None,
            }
        })
        .collect();
    let kept: Vec<&Array1<f64>> = results.iter().flatten().collect();
    let skipped = results.len() - kept.len();
    if kept.is_empty() {
        return Err(FlcoxError::Numerical(
            "every bootstrap replicate failed".into(),
        ));
    }
    let j = dataset.grid.len();
    let mut curves = Array2::zeros((kept.len(), j));
    for (row, values) in kept.iter().enumerate() {
        curves.row_mut(row).assign(*values);
    }
    let mean = curves.mean_axis(Axis(0)).expect("nonempty");
    Ok(BootstrapBeta {
        curves,
        mean,
        skipped,
    })
}
