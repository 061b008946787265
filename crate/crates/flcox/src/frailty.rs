use crate::error::{FlcoxError, Result};
use crate::linalg::{solve_spd, CholFactor};
use crate::survival::{CoxDesign, FrailtyConfig, RiskSetIndex};
use ndarray::{s, Array1, Array2};
use serde::{Deserialize, Serialize};

/// Clamp range for the frailty variance update; keeps the outer loop alive
/// when the data carry no frailty signal.
pub const ALPHA_CLAMP: (f64, f64) = (1e-6, 1e6);

/// Nondecreasing step-function estimate of the cumulative baseline hazard,
/// with jumps at the distinct event times.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct BaselineHazard {
    pub times: Vec<f64>,
    pub cumhaz: Vec<f64>,
}

impl BaselineHazard {
    /// H0(t): cumulative hazard at time t; 0 before the first event time.
    pub fn eval(&self, t: f64) -> f64 {
        let pos = self.times.partition_point(|&u| u <= t);
        if pos == 0 {
            0.0
        } else {
            self.cumhaz[pos - 1]
        }
    }
}

/// Value, score, and information of the penalized partial log-likelihood in a
/// single risk-set sweep. The Hessian returned is the negative second
/// derivative (observed information), with the (1/alpha) I penalty block added
/// on the frailty coordinates.
struct PplParts {
    value: f64,
    score_theta: Option<Array1<f64>>,
    score_w: Option<Array1<f64>>,
    /// (q + d) x (q + d) information matrix when requested.
    info: Option<Array2<f64>>,
}

struct PplRequest {
    score: bool,
    info: bool,
}

fn ppl_parts(
    design: &CoxDesign,
    index: &RiskSetIndex,
    theta: &Array1<f64>,
    w: &Array1<f64>,
    alpha: f64,
    req: &PplRequest,
) -> Result<PplParts> {
    let q = design.n_covariates();
    let with_frailty = !w.is_empty();
    let d = if with_frailty { design.n_groups() } else { 0 };
    if theta.len() != q {
        return Err(FlcoxError::DimensionMismatch(format!(
            "theta has length {}, design has {} covariates",
            theta.len(),
            q
        )));
    }
    if with_frailty {
        if w.len() != design.n_groups() {
            return Err(FlcoxError::DimensionMismatch(format!(
                "w has length {}, design has {} groups",
                w.len(),
                design.n_groups()
            )));
        }
        if !(alpha > 0.0) {
            return Err(FlcoxError::InvalidInput(format!(
                "frailty variance must be positive, got {alpha}"
            )));
        }
    }
    let eta = design.linear_predictor(theta, w);
    if eta.iter().any(|v| !v.is_finite()) {
        return Err(FlcoxError::NonFinite("linear predictor"));
    }
    // running-max subtraction keeps the risk-set exponential sums bounded
    let eta_max = eta.iter().cloned().fold(f64::NEG_INFINITY, f64::max);

    let records = design.records();
    let combined = design.combined();
    let mut value = 0.0;
    let mut score_theta = req.score.then(|| Array1::<f64>::zeros(q));
    let mut score_w = (req.score && with_frailty).then(|| Array1::<f64>::zeros(d));
    let mut info = req.info.then(|| Array2::<f64>::zeros((q + d, q + d)));

    // accumulated risk-set sums over subjects with time >= current event time
    let mut s0 = 0.0;
    let mut s1_d = Array1::<f64>::zeros(q);
    let mut s1_u = Array1::<f64>::zeros(d);
    let need_second = req.info;
    let mut s2_dd = need_second.then(|| Array2::<f64>::zeros((q, q)));
    let mut s2_du = (need_second && with_frailty).then(|| Array2::<f64>::zeros((q, d)));
    let mut s2_uu_diag = (need_second && with_frailty).then(|| Array1::<f64>::zeros(d));

    let mut cursor = 0usize;
    let order = index.order_desc();
    for pos in (0..index.n_event_times()).rev() {
        // admit subjects entering the risk set at this event time
        let target = index.risk_size(pos);
        while cursor < target {
            let i = order[cursor];
            let r = (eta[i] - eta_max).exp();
            s0 += r;
            let row = combined.row(i);
            for c in 0..q {
                s1_d[c] += r * row[c];
            }
            if with_frailty {
                s1_u[records[i].group] += r;
            }
            if let Some(ref mut m) = s2_dd {
                for a in 0..q {
                    let ra = r * row[a];
                    for b in a..q {
                        m[[a, b]] += ra * row[b];
                    }
                }
            }
            if let Some(ref mut m) = s2_du {
                let g = records[i].group;
                for a in 0..q {
                    m[[a, g]] += r * row[a];
                }
            }
            if let Some(ref mut v) = s2_uu_diag {
                v[records[i].group] += r;
            }
            cursor += 1;
        }
        let d_t = index.event_counts()[pos] as f64;
        let log_denominator = s0.ln() + eta_max;
        for &i in index.event_subjects(pos) {
            value += eta[i] - log_denominator;
            if let Some(ref mut sd) = score_theta {
                let row = combined.row(i);
                for c in 0..q {
                    sd[c] += row[c];
                }
            }
            if let Some(ref mut su) = score_w {
                su[records[i].group] += 1.0;
            }
        }
        if let Some(ref mut sd) = score_theta {
            for c in 0..q {
                sd[c] -= d_t * s1_d[c] / s0;
            }
        }
        if let Some(ref mut su) = score_w {
            for g in 0..d {
                su[g] -= d_t * s1_u[g] / s0;
            }
        }
        if let Some(ref mut h) = info {
            let m_d: Vec<f64> = (0..q).map(|c| s1_d[c] / s0).collect();
            if let Some(ref s2) = s2_dd {
                for a in 0..q {
                    for b in a..q {
                        let v = d_t * (s2[[a, b]] / s0 - m_d[a] * m_d[b]);
                        h[[a, b]] += v;
                        if a != b {
                            h[[b, a]] += v;
                        }
                    }
                }
            }
            if with_frailty {
                let m_u: Vec<f64> = (0..d).map(|g| s1_u[g] / s0).collect();
                if let Some(ref s2) = s2_du {
                    for a in 0..q {
                        for g in 0..d {
                            let v = d_t * (s2[[a, g]] / s0 - m_d[a] * m_u[g]);
                            h[[a, q + g]] += v;
                            h[[q + g, a]] += v;
                        }
                    }
                }
                if let Some(ref s2) = s2_uu_diag {
                    for g in 0..d {
                        h[[q + g, q + g]] += d_t * s2[g] / s0;
                    }
                    for g in 0..d {
                        if m_u[g] == 0.0 {
                            continue;
                        }
                        for g2 in 0..d {
                            h[[q + g, q + g2]] -= d_t * m_u[g] * m_u[g2];
                        }
                    }
                }
            }
        }
    }

    if with_frailty {
        value -= w.dot(w) / (2.0 * alpha);
        if let Some(ref mut su) = score_w {
            for g in 0..d {
                su[g] -= w[g] / alpha;
            }
        }
        if let Some(ref mut h) = info {
            for g in 0..d {
                h[[q + g, q + g]] += 1.0 / alpha;
            }
        }
    }
    if !value.is_finite() {
        return Err(FlcoxError::Numerical(
            "penalized partial log-likelihood diverged".into(),
        ));
    }
    Ok(PplParts {
        value,
        score_theta,
        score_w,
        info,
    })
}

/// Penalized partial log-likelihood with Breslow handling of tied event times.
pub fn penalized_partial_loglik(
    theta: &Array1<f64>,
    w: &Array1<f64>,
    alpha: f64,
    design: &CoxDesign,
) -> Result<f64> {
    let index = RiskSetIndex::build(design.records())?;
    let parts = ppl_parts(
        design,
        &index,
        theta,
        w,
        alpha,
        &PplRequest {
            score: false,
            info: false,
        },
    )?;
    Ok(parts.value)
}

/// First derivatives of the PPL with respect to theta and w.
pub fn ppl_score(
    theta: &Array1<f64>,
    w: &Array1<f64>,
    alpha: f64,
    design: &CoxDesign,
) -> Result<(Array1<f64>, Array1<f64>)> {
    let index = RiskSetIndex::build(design.records())?;
    let parts = ppl_parts(
        design,
        &index,
        theta,
        w,
        alpha,
        &PplRequest {
            score: true,
            info: false,
        },
    )?;
    Ok((
        parts.score_theta.expect("requested"),
        parts.score_w.unwrap_or_else(|| Array1::zeros(0)),
    ))
}

/// Observed information (negative Hessian of the PPL), size (p+K+d) when w is
/// nonempty, (p+K) otherwise.
pub fn ppl_hessian(
    theta: &Array1<f64>,
    w: &Array1<f64>,
    alpha: f64,
    design: &CoxDesign,
) -> Result<Array2<f64>> {
    let index = RiskSetIndex::build(design.records())?;
    let parts = ppl_parts(
        design,
        &index,
        theta,
        w,
        alpha,
        &PplRequest {
            score: false,
            info: true,
        },
    )?;
    Ok(parts.info.expect("requested"))
}

/// Result of the inner Newton solve at fixed frailty variance.
#[derive(Debug, Clone)]
pub struct InnerSolve {
    pub theta: Array1<f64>,
    pub w: Array1<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub final_ppl: f64,
    pub score_norm: f64,
}

/// Maximize the PPL jointly over (theta, w) at fixed alpha, with step-halving
/// enforcing a nondecreasing objective. With `strict_alternation` the theta
/// and w blocks are solved in turn instead of jointly.
pub fn inner_newton(
    design: &CoxDesign,
    alpha: f64,
    start: (Array1<f64>, Array1<f64>),
    config: &FrailtyConfig,
) -> Result<InnerSolve> {
    let index = RiskSetIndex::build(design.records())?;
    inner_newton_with_index(design, &index, alpha, start, config)
}

fn inner_newton_with_index(
    design: &CoxDesign,
    index: &RiskSetIndex,
    alpha: f64,
    start: (Array1<f64>, Array1<f64>),
    config: &FrailtyConfig,
) -> Result<InnerSolve> {
    config.validate()?;
    let (mut theta, mut w) = start;
    if theta.iter().chain(w.iter()).any(|v| !v.is_finite()) {
        return Err(FlcoxError::NonFinite("newton start"));
    }
    let d = w.len();
    let req = PplRequest {
        score: true,
        info: true,
    };
    let mut parts = ppl_parts(design, index, &theta, &w, alpha, &req)?;
    let mut iterations = 0;
    let mut converged = false;
    for _ in 0..config.max_inner {
        let score_norm = sup_norm(&parts);
        if score_norm < config.tol_inner {
            converged = true;
            break;
        }
        iterations += 1;
        let accepted = if config.strict_alternation && d > 0 {
            alternating_step(design, index, alpha, &mut theta, &mut w, &parts, config)?
        } else {
            joint_step(design, index, alpha, &mut theta, &mut w, &parts, config)?
        };
        if !accepted {
            break; // stalled: no step improved the objective
        }
        parts = ppl_parts(design, index, &theta, &w, alpha, &req)?;
    }
    let score_norm = sup_norm(&parts);
    if score_norm < config.tol_inner {
        converged = true;
    }
    Ok(InnerSolve {
        theta,
        w,
        converged,
        iterations,
        final_ppl: parts.value,
        score_norm,
    })
}

fn sup_norm(parts: &PplParts) -> f64 {
    let mut m: f64 = 0.0;
    if let Some(ref s) = parts.score_theta {
        m = s.iter().fold(m, |acc, v| acc.max(v.abs()));
    }
    if let Some(ref s) = parts.score_w {
        m = s.iter().fold(m, |acc, v| acc.max(v.abs()));
    }
    m
}

fn assemble_gradient(parts: &PplParts, q: usize, d: usize) -> Array1<f64> {
    let mut g = Array1::zeros(q + d);
    if let Some(ref st) = parts.score_theta {
        g.slice_mut(s![..q]).assign(st);
    }
    if let Some(ref sw) = parts.score_w {
        g.slice_mut(s![q..]).assign(sw);
    }
    g
}

/// One joint Newton step with step-halving; returns false when no fraction of
/// the step improves the PPL.
fn joint_step(
    design: &CoxDesign,
    index: &RiskSetIndex,
    alpha: f64,
    theta: &mut Array1<f64>,
    w: &mut Array1<f64>,
    parts: &PplParts,
    config: &FrailtyConfig,
) -> Result<bool> {
    let q = theta.len();
    let d = w.len();
    let grad = assemble_gradient(parts, q, d);
    let info = parts.info.as_ref().expect("info requested");
    let step = solve_spd(info, &grad)?;
    let value_req = PplRequest {
        score: false,
        info: false,
    };
    let mut scale = 1.0;
    for _ in 0..=config.step_halving_max {
        let cand_theta = &*theta + &(scale * &step.slice(s![..q]).to_owned());
        let cand_w = &*w + &(scale * &step.slice(s![q..]).to_owned());
        match ppl_parts(design, index, &cand_theta, &cand_w, alpha, &value_req) {
            Ok(p) if p.value >= parts.value - 1e-12 => {
                *theta = cand_theta;
                *w = cand_w;
                return Ok(true);
            }
            _ => scale *= 0.5,
        }
    }
    Ok(false)
}

/// Strict alternation: a theta-block Newton step followed by a w-block step,
/// each with its own step-halving.
fn alternating_step(
    design: &CoxDesign,
    index: &RiskSetIndex,
    alpha: f64,
    theta: &mut Array1<f64>,
    w: &mut Array1<f64>,
    parts: &PplParts,
    config: &FrailtyConfig,
) -> Result<bool> {
    let q = theta.len();
    let info = parts.info.as_ref().expect("info requested");
    let value_req = PplRequest {
        score: false,
        info: false,
    };
    let mut improved = false;
    let mut current = parts.value;

    let grad_t = parts.score_theta.clone().expect("score requested");
    let info_tt = info.slice(s![..q, ..q]).to_owned();
    let step_t = solve_spd(&info_tt, &grad_t)?;
    let mut scale = 1.0;
    for _ in 0..=config.step_halving_max {
        let cand = &*theta + &(scale * &step_t);
        match ppl_parts(design, index, &cand, w, alpha, &value_req) {
            Ok(p) if p.value >= current - 1e-12 => {
                *theta = cand;
                current = p.value;
                improved = true;
                break;
            }
            _ => scale *= 0.5,
        }
    }

    // refresh the w-gradient at the new theta before the w solve
    let score_req = PplRequest {
        score: true,
        info: true,
    };
    let refreshed = ppl_parts(design, index, theta, w, alpha, &score_req)?;
    let grad_w = refreshed.score_w.clone().expect("score requested");
    let info_ww = refreshed
        .info
        .as_ref()
        .expect("info requested")
        .slice(s![q.., q..])
        .to_owned();
    let step_w = solve_spd(&info_ww, &grad_w)?;
    let mut scale = 1.0;
    for _ in 0..=config.step_halving_max {
        let cand = &*w + &(scale * &step_w);
        match ppl_parts(design, index, theta, &cand, alpha, &value_req) {
            Ok(p) if p.value >= current - 1e-12 => {
                *w = cand;
                improved = true;
                break;
            }
            _ => scale *= 0.5,
        }
    }
    Ok(improved)
}

/// Breslow estimator of the cumulative baseline hazard at a given linear
/// predictor.
pub fn breslow_cumhaz(design: &CoxDesign, eta: &Array1<f64>) -> Result<BaselineHazard> {
    if eta.len() != design.n() {
        return Err(FlcoxError::DimensionMismatch(format!(
            "eta has length {}, design has {} subjects",
            eta.len(),
            design.n()
        )));
    }
    if eta.iter().any(|v| !v.is_finite()) {
        return Err(FlcoxError::NonFinite("linear predictor"));
    }
    let index = RiskSetIndex::build(design.records())?;
    breslow_with_index(design, &index, eta)
}

fn breslow_with_index(
    _design: &CoxDesign,
    index: &RiskSetIndex,
    eta: &Array1<f64>,
) -> Result<BaselineHazard> {
    let eta_max = eta.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let order = index.order_desc();
    let n_et = index.n_event_times();
    let mut jumps = vec![0.0; n_et];
    let mut s0 = 0.0;
    let mut cursor = 0usize;
    for pos in (0..n_et).rev() {
        let target = index.risk_size(pos);
        while cursor < target {
            s0 += (eta[order[cursor]] - eta_max).exp();
            cursor += 1;
        }
        debug_assert!(s0 > 0.0, "empty risk set at an event time");
        jumps[pos] = index.event_counts()[pos] as f64 * (-eta_max).exp() / s0;
    }
    let mut cum = 0.0;
    let cumhaz = jumps
        .iter()
        .map(|j| {
            cum += j;
            cum
        })
        .collect();
    Ok(BaselineHazard {
        times: index.event_times().to_vec(),
        cumhaz,
    })
}

/// Laplace curvature matrix K(w) = sum_i H0(T_i) exp(eta_i) U_i U_i^T + (1/alpha) I.
/// With one-hot incidence this is diagonal; the full matrix is returned for
/// the general contract.
pub fn laplace_k_matrix(
    design: &CoxDesign,
    theta: &Array1<f64>,
    w: &Array1<f64>,
    alpha: f64,
    h0: &BaselineHazard,
) -> Result<Array2<f64>> {
    let diag = laplace_k_diag(design, theta, w, alpha, h0)?;
    let d = diag.len();
    let mut k = Array2::zeros((d, d));
    for g in 0..d {
        k[[g, g]] = diag[g];
    }
    if diag.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(FlcoxError::LaplaceNotPd);
    }
    Ok(k)
}

fn laplace_k_diag(
    design: &CoxDesign,
    theta: &Array1<f64>,
    w: &Array1<f64>,
    alpha: f64,
    h0: &BaselineHazard,
) -> Result<Array1<f64>> {
    if !(alpha > 0.0) {
        return Err(FlcoxError::InvalidInput(format!(
            "frailty variance must be positive, got {alpha}"
        )));
    }
    let eta = design.linear_predictor(theta, w);
    let mut diag = Array1::from_elem(design.n_groups(), 1.0 / alpha);
    for (i, r) in design.records().iter().enumerate() {
        diag[r.group] += h0.eval(r.time) * eta[i].exp();
    }
    Ok(diag)
}

/// Profile-likelihood update of the frailty variance, clamped to
/// `ALPHA_CLAMP`. Returns the new alpha and whether the clamp fired.
pub fn update_alpha(w_hat: &Array1<f64>, k_matrix: &Array2<f64>, d: usize) -> Result<(f64, bool)> {
    if d == 0 || k_matrix.nrows() != d || k_matrix.ncols() != d {
        return Err(FlcoxError::DimensionMismatch(format!(
            "K matrix must be {d}x{d}"
        )));
    }
    let factor = CholFactor::new(k_matrix).ok_or(FlcoxError::LaplaceNotPd)?;
    let raw = (w_hat.dot(w_hat) + factor.trace_inverse()) / d as f64;
    let clamped = raw.clamp(ALPHA_CLAMP.0, ALPHA_CLAMP.1);
    Ok((clamped, clamped != raw))
}

fn update_alpha_diag(w_hat: &Array1<f64>, k_diag: &Array1<f64>) -> (f64, bool) {
    let d = k_diag.len() as f64;
    let raw = (w_hat.dot(w_hat) + k_diag.iter().map(|v| 1.0 / v).sum::<f64>()) / d;
    let clamped = raw.clamp(ALPHA_CLAMP.0, ALPHA_CLAMP.1);
    (clamped, clamped != raw)
}

/// Fit diagnostics: iteration counts, convergence, and final objective.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct FitDiagnostics {
    pub inner_iters: Vec<usize>,
    pub outer_iters: usize,
    pub converged: bool,
    pub final_ppl: f64,
    pub final_score_norm: f64,
    pub alpha_clamped: bool,
}

/// Converged (or best-effort) estimates from the penalized partial likelihood.
#[derive(Debug, Clone)]
pub struct FrailtyFit {
    pub gamma_hat: Array1<f64>,
    pub beta_coef_hat: Array1<f64>,
    pub w_hat: Array1<f64>,
    pub alpha_hat: Option<f64>,
    pub baseline: BaselineHazard,
    pub diagnostics: FitDiagnostics,
    pub n_scalar: usize,
    pub n_scores: usize,
}

impl FrailtyFit {
    /// Concatenated (gamma, beta) vector.
    pub fn theta(&self) -> Array1<f64> {
        let mut out = Array1::zeros(self.n_scalar + self.n_scores);
        out.slice_mut(s![..self.n_scalar]).assign(&self.gamma_hat);
        out.slice_mut(s![self.n_scalar..]).assign(&self.beta_coef_hat);
        out
    }
}

/// Fit the Cox model with normal frailty: alternate the inner Newton solve of
/// (theta, w) with the profile-likelihood update of alpha until the variance
/// stabilizes. With `frailty_enabled = false` the frailty block is skipped
/// entirely and the plain Cox reduction is fitted.
pub fn fit(design: &CoxDesign, config: &FrailtyConfig) -> Result<FrailtyFit> {
    config.validate()?;
    let index = RiskSetIndex::build(design.records())?;
    let q = design.n_covariates();
    let p = design.n_scalar();

    if !config.frailty_enabled {
        let solve = inner_newton_with_index(
            design,
            &index,
            1.0,
            (Array1::zeros(q), Array1::zeros(0)),
            config,
        )?;
        let eta = design.linear_predictor(&solve.theta, &solve.w);
        let baseline = breslow_with_index(design, &index, &eta)?;
        return Ok(FrailtyFit {
            gamma_hat: solve.theta.slice(s![..p]).to_owned(),
            beta_coef_hat: solve.theta.slice(s![p..]).to_owned(),
            w_hat: Array1::zeros(0),
            alpha_hat: None,
            baseline,
            diagnostics: FitDiagnostics {
                inner_iters: vec![solve.iterations],
                outer_iters: 0,
                converged: solve.converged,
                final_ppl: solve.final_ppl,
                final_score_norm: solve.score_norm,
                alpha_clamped: false,
            },
            n_scalar: p,
            n_scores: q - p,
        });
    }

    let d = design.n_groups();
    let mut alpha = config.alpha_init;
    let mut theta = Array1::zeros(q);
    let mut w = Array1::zeros(d);
    let mut inner_iters = Vec::new();
    let mut outer_iters = 0;
    let mut alpha_converged = false;
    let mut alpha_clamped = false;
    let mut last_solve: Option<InnerSolve> = None;

    for _ in 0..config.max_outer {
        outer_iters += 1;
        let solve =
            inner_newton_with_index(design, &index, alpha, (theta.clone(), w.clone()), config)?;
        inner_iters.push(solve.iterations);
        theta = solve.theta.clone();
        w = solve.w.clone();
        let eta = design.linear_predictor(&theta, &w);
        let baseline = breslow_with_index(design, &index, &eta)?;
        let k_diag = laplace_k_diag(design, &theta, &w, alpha, &baseline)?;
        let (alpha_new, clamped) = update_alpha_diag(&w, &k_diag);
        alpha_clamped |= clamped;
        last_solve = Some(solve);
        if (alpha_new - alpha).abs() < config.tol_outer * (1.0 + alpha) {
            alpha = alpha_new;
            alpha_converged = true;
            break;
        }
        alpha = alpha_new;
    }

    // make (theta, w) consistent with the final alpha
    let solve = inner_newton_with_index(design, &index, alpha, (theta, w), config)?;
    inner_iters.push(solve.iterations);
    let inner_converged = solve.converged;
    let eta = design.linear_predictor(&solve.theta, &solve.w);
    let baseline = breslow_with_index(design, &index, &eta)?;
    let _ = last_solve;

    Ok(FrailtyFit {
        gamma_hat: solve.theta.slice(s![..p]).to_owned(),
        beta_coef_hat: solve.theta.slice(s![p..]).to_owned(),
        w_hat: solve.w,
        alpha_hat: Some(alpha),
        baseline,
        diagnostics: FitDiagnostics {
            inner_iters,
            outer_iters,
            converged: alpha_converged && inner_converged,
            final_ppl: solve.final_ppl,
            final_score_norm: solve.score_norm,
            alpha_clamped,
        },
        n_scalar: p,
        n_scores: q - p,
    })
}

/// Linear predictors for new subjects. Out-of-sample predictions default to
/// excluding frailty (new subjects carry the prior mean 0); pass group indices
/// to include fitted frailties for known groups.
pub fn predict_risk(
    fit: &FrailtyFit,
    z_new: &Array2<f64>,
    scores_new: &Array2<f64>,
    groups: Option<&[usize]>,
) -> Result<Array1<f64>> {
    if z_new.ncols() != fit.gamma_hat.len() || scores_new.ncols() != fit.beta_coef_hat.len() {
        return Err(FlcoxError::DimensionMismatch(format!(
            "prediction columns ({} scalar, {} scores) do not match fit ({} scalar, {} scores)",
            z_new.ncols(),
            scores_new.ncols(),
            fit.gamma_hat.len(),
            fit.beta_coef_hat.len()
        )));
    }
    if z_new.nrows() != scores_new.nrows() {
        return Err(FlcoxError::DimensionMismatch(
            "Z and score row counts differ".into(),
        ));
    }
    let mut eta = z_new.dot(&fit.gamma_hat) + scores_new.dot(&fit.beta_coef_hat);
    if let Some(groups) = groups {
        if groups.len() != z_new.nrows() {
            return Err(FlcoxError::DimensionMismatch(
                "group vector length does not match rows".into(),
            ));
        }
        for (i, &g) in groups.iter().enumerate() {
            let w = fit.w_hat.get(g).ok_or_else(|| {
                FlcoxError::DimensionMismatch(format!("group {g} not present in the fit"))
            })?;
            eta[i] += w;
        }
    }
    Ok(eta)
}
