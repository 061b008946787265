use crate::error::{FlcoxError, Result};
use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

/// One subject's observed survival outcome.
///
/// `group` is the 0-based frailty group index; with unshared frailty each
/// subject is its own group.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurvivalRecord {
    pub time: f64,
    pub status: u8,
    pub group: usize,
}

impl SurvivalRecord {
    pub fn new(time: f64, status: u8, group: usize) -> Result<Self> {
        if !(time > 0.0) || !time.is_finite() {
            return Err(FlcoxError::InvalidInput(format!(
                "survival time must be positive and finite, got {time}"
            )));
        }
        if status > 1 {
            return Err(FlcoxError::InvalidInput(format!(
                "status must be 0 or 1, got {status}"
            )));
        }
        Ok(Self {
            time,
            status,
            group,
        })
    }

    pub fn is_event(&self) -> bool {
        self.status == 1
    }
}

/// Design for the finite-dimensional Cox model with frailty: survival records,
/// scalar covariates Z (n x p), FPC scores (n x K), and the one-hot frailty
/// incidence encoded by each record's group index (d groups in total).
#[derive(Debug, Clone)]
pub struct CoxDesign {
    records: Vec<SurvivalRecord>,
    z: Array2<f64>,
    scores: Array2<f64>,
    /// [Z | scores], one row per subject.
    combined: Array2<f64>,
    n_groups: usize,
}

impl CoxDesign {
    pub fn new(records: Vec<SurvivalRecord>, z: Array2<f64>, scores: Array2<f64>) -> Result<Self> {
        let n = records.len();
        if n == 0 {
            return Err(FlcoxError::InvalidInput("empty design".into()));
        }
        if z.nrows() != n || scores.nrows() != n {
            return Err(FlcoxError::DimensionMismatch(format!(
                "records ({}), Z rows ({}), score rows ({}) must agree",
                n,
                z.nrows(),
                scores.nrows()
            )));
        }
        if z.iter().chain(scores.iter()).any(|v| !v.is_finite()) {
            return Err(FlcoxError::NonFinite("design matrix"));
        }
        let n_groups = match records.iter().map(|r| r.group).max() {
            Some(max) => max + 1,
            None => 0,
        };
        // every group must be nonempty (full column rank of the one-hot U)
        let mut seen = vec![false; n_groups];
        for r in &records {
            seen[r.group] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(FlcoxError::InvalidInput(
                "frailty groups must be consecutively indexed and nonempty".into(),
            ));
        }
        let combined = ndarray::concatenate(Axis(1), &[z.view(), scores.view()])
            .map_err(|e| FlcoxError::DimensionMismatch(e.to_string()))?;
        Ok(Self {
            records,
            z,
            scores,
            combined,
            n_groups,
        })
    }

    /// Unshared frailty: one group per subject, in subject order.
    pub fn unshared(
        times: &[f64],
        status: &[u8],
        z: Array2<f64>,
        scores: Array2<f64>,
    ) -> Result<Self> {
        if times.len() != status.len() {
            return Err(FlcoxError::DimensionMismatch(
                "times and status lengths differ".into(),
            ));
        }
        let records = times
            .iter()
            .zip(status.iter())
            .enumerate()
            .map(|(i, (&t, &s))| SurvivalRecord::new(t, s, i))
            .collect::<Result<Vec<_>>>()?;
        Self::new(records, z, scores)
    }

    pub fn n(&self) -> usize {
        self.records.len()
    }

    /// Number of theta columns (p + K).
    pub fn n_covariates(&self) -> usize {
        self.combined.ncols()
    }

    pub fn n_scalar(&self) -> usize {
        self.z.ncols()
    }

    pub fn n_scores(&self) -> usize {
        self.scores.ncols()
    }

    pub fn n_groups(&self) -> usize {
        self.n_groups
    }

    pub fn records(&self) -> &[SurvivalRecord] {
        &self.records
    }

    pub fn z(&self) -> &Array2<f64> {
        &self.z
    }

    pub fn scores(&self) -> &Array2<f64> {
        &self.scores
    }

    /// Combined covariate matrix D = [Z | scores].
    pub fn combined(&self) -> &Array2<f64> {
        &self.combined
    }

    pub fn n_events(&self) -> usize {
        self.records.iter().filter(|r| r.is_event()).count()
    }

    /// Linear predictor D theta + U^T w. Pass an empty `w` to skip frailty.
    pub fn linear_predictor(&self, theta: &Array1<f64>, w: &Array1<f64>) -> Array1<f64> {
        let mut eta = self.combined.dot(theta);
        if !w.is_empty() {
            for (i, r) in self.records.iter().enumerate() {
                eta[i] += w[r.group];
            }
        }
        eta
    }

    /// Warnings about a rank-deficient [Z | scores] block.
    pub fn rank_warnings(&self) -> Vec<String> {
        let q = self.n_covariates();
        let m = nalgebra::DMatrix::from_fn(self.n(), q, |i, j| self.combined[[i, j]]);
        let svd = m.svd(false, false);
        let max_sv = svd.singular_values.iter().cloned().fold(0.0, f64::max);
        let rank = svd
            .singular_values
            .iter()
            .filter(|s| **s > 1e-10 * max_sv.max(1.0))
            .count();
        if rank < q {
            vec![format!(
                "design matrix [Z | scores] has column rank {rank} < {q}; estimates may be unstable"
            )]
        } else {
            Vec::new()
        }
    }
}

/// Risk-set index: distinct event times ascending, with the subjects entering
/// the risk set listed in decreasing-time order so a single sweep accumulates
/// every risk-set sum.
#[derive(Debug, Clone)]
pub struct RiskSetIndex {
    /// subject indices sorted by observed time descending
    order_desc: Vec<usize>,
    /// distinct event times, ascending
    event_times: Vec<f64>,
    /// events at each distinct event time
    event_counts: Vec<usize>,
    /// event subject indices at each distinct event time
    event_subjects: Vec<Vec<usize>>,
    /// number of subjects (prefix of order_desc) in the risk set at each
    /// distinct event time
    risk_sizes: Vec<usize>,
}

impl RiskSetIndex {
    pub fn build(records: &[SurvivalRecord]) -> Result<Self> {
        let n = records.len();
        let mut order_desc: Vec<usize> = (0..n).collect();
        order_desc.sort_by(|&a, &b| {
            records[b]
                .time
                .partial_cmp(&records[a].time)
                .expect("finite times")
        });
        let mut event_times = Vec::new();
        let mut event_counts = Vec::new();
        let mut event_subjects: Vec<Vec<usize>> = Vec::new();
        for i in 0..n {
            if records[i].is_event() {
                let t = records[i].time;
                match event_times.binary_search_by(|probe: &f64| probe.partial_cmp(&t).unwrap()) {
                    Ok(pos) => {
                        event_counts[pos] += 1;
                        event_subjects[pos].push(i);
                    }
                    Err(pos) => {
                        event_times.insert(pos, t);
                        event_counts.insert(pos, 1);
                        event_subjects.insert(pos, vec![i]);
                    }
                }
            }
        }
        if event_times.is_empty() {
            return Err(FlcoxError::NoEvents);
        }
        let mut risk_sizes = vec![0usize; event_times.len()];
        for (pos, &t) in event_times.iter().enumerate() {
            // subjects with observed time >= t
            let size = order_desc.partition_point(|&i| records[i].time >= t);
            risk_sizes[pos] = size;
        }
        Ok(Self {
            order_desc,
            event_times,
            event_counts,
            event_subjects,
            risk_sizes,
        })
    }

    pub fn n_event_times(&self) -> usize {
        self.event_times.len()
    }

    pub fn event_times(&self) -> &[f64] {
        &self.event_times
    }

    pub fn event_counts(&self) -> &[usize] {
        &self.event_counts
    }

    pub fn event_subjects(&self, pos: usize) -> &[usize] {
        &self.event_subjects[pos]
    }

    /// Subjects in decreasing-time order.
    pub fn order_desc(&self) -> &[usize] {
        &self.order_desc
    }

    /// Size of the risk set at the pos-th distinct event time.
    pub fn risk_size(&self, pos: usize) -> usize {
        self.risk_sizes[pos]
    }
}

/// Knobs for the penalized-partial-likelihood fit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FrailtyConfig {
    pub alpha_init: f64,
    pub tol_inner: f64,
    pub tol_outer: f64,
    pub max_inner: usize,
    pub max_outer: usize,
    pub frailty_enabled: bool,
    pub step_halving_max: usize,
    /// Alternate theta- and w-solves instead of joint Newton steps.
    pub strict_alternation: bool,
}

impl Default for FrailtyConfig {
    fn default() -> Self {
        Self {
            alpha_init: 0.5,
            tol_inner: 1e-7,
            tol_outer: 1e-5,
            max_inner: 50,
            max_outer: 400,
            frailty_enabled: true,
            step_halving_max: 20,
            strict_alternation: false,
        }
    }
}

impl FrailtyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.alpha_init <= 0.0 || self.tol_inner <= 0.0 || self.tol_outer <= 0.0 {
            return Err(FlcoxError::InvalidInput(
                "alpha_init and tolerances must be positive".into(),
            ));
        }
        if self.max_inner == 0 || self.max_outer == 0 {
            return Err(FlcoxError::InvalidInput(
                "iteration caps must be at least 1".into(),
            ));
        }
        Ok(())
    }

    pub fn no_frailty(mut self) -> Self {
        self.frailty_enabled = false;
        self
    }
}
