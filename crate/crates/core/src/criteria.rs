//! Oscillation criteria and the verdict machinery around them.
//!
//! Every criterion works on the transformed coefficients
//!
//! ```text
//! P̄_i(t) = P_i(t) - Q_i(t - c_i(t)) · (1 - c_i'(t)),
//! ```
//!
//! the net delayed feedback left after each negative term is absorbed into
//! its composite delay. Liminf-style statistics are compared against `1/e`,
//! limsup-style ones against `1` (or `1/e` for the slowly varying variants),
//! always strictly and with an explicit margin: a criterion only fires when
//! its statistic clears `threshold + margin` *and* the tail trend of the
//! statistic has stabilised. Anything else is reported as inconclusive, and
//! failed preconditions make a criterion inapplicable rather than silently
//! skipped. Simulation evidence never enters here; these verdicts are
//! certificates about the equation, not about one trajectory.

use crate::expr::Expr;
use crate::kernel::{self, uniform_grid, GridFn, NumericError, TailEstimate};
use crate::model::{AnalysisConfig, NddeProblem};

/// Threshold for the liminf-family criteria.
pub const ONE_OVER_E: f64 = 1.0 / std::f64::consts::E;

/// Outcome of a single criterion or of the whole analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    /// All preconditions hold, the statistic clears its threshold by more
    /// than the margin, and the tail trend has converged.
    Oscillatory,
    /// Applicable but not conclusive at this horizon.
    Inconclusive,
    /// At least one precondition failed, or the statistic could not be
    /// computed at all.
    Inapplicable,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Oscillatory => "OSCILLATORY",
            Verdict::Inconclusive => "INCONCLUSIVE",
            Verdict::Inapplicable => "INAPPLICABLE",
        }
    }
}

/// One named check that gates a criterion, with a human-readable outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct Precondition {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

fn pre(name: &str, pass: bool, detail: String) -> Precondition {
    Precondition {
        name: name.to_string(),
        pass,
        detail,
    }
}

/// Result of evaluating one criterion.
#[derive(Debug, Clone, PartialEq)]
pub struct CriterionReport {
    /// `A1` .. `D1`, `A2` .. `C2`, or an iterated id such as `A3(2)`.
    pub id: String,
    /// Iteration depth for the constant-delay families, when applicable.
    pub m: Option<usize>,
    pub statistic: Option<f64>,
    pub threshold: f64,
    pub margin: f64,
    pub verdict: Verdict,
    pub preconditions: Vec<Precondition>,
    /// Tail estimate of the statistic (trend windows and convergence flag).
    pub tail: Option<TailEstimate>,
    /// Slow-variation score of the statistic, for the criteria that need it.
    pub slow_score: Option<f64>,
    pub notes: Vec<String>,
}

/// Full analysis outcome: per-criterion reports plus the shared context
/// (transform mode, hypothesis checks, contraction factor).
#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisReport {
    pub overall: Verdict,
    pub margin: f64,
    pub delay_bound: f64,
    pub all_delays_constant: bool,
    pub delta_constant: bool,
    /// `direct`, `sup-bound`, or `unavailable`.
    pub transform_mode: String,
    pub transform_detail: String,
    pub h1: Precondition,
    pub h2: Precondition,
    /// Contraction factor for the iterated criteria, when admissible.
    pub omega: Option<f64>,
    pub omega_detail: String,
    pub criteria: Vec<CriterionReport>,
    pub notes: Vec<String>,
}

/// Optional analysis inputs beyond the problem and configuration.
#[derive(Debug, Clone, Default)]
pub struct AnalyzeOptions {
    /// Criterion ids (`A2`, `B2`, `C2`, `Am`, `Bm`) whose slow-variation
    /// requirement is asserted by the caller instead of being scored.
    pub assert_slow: Vec<String>,
    /// Override for the comparison delay used by `C2`. Must satisfy
    /// `0 <= tau_hat(t) <= tau_i(t)` for every i on the tail grid.
    pub tau_hat: Option<Expr>,
}

impl AnalyzeOptions {
    fn asserts(&self, family: &str) -> bool {
        self.assert_slow.iter().any(|s| s == family)
    }
}

// ---------------------------------------------------------------------------
// Transformed coefficients.

/// `P̄_i(t)` by direct evaluation of the composite delay.
fn pbar_at(p: &NddeProblem, cfg: &AnalysisConfig, i: usize, t: f64) -> Result<f64, NumericError> {
    let pv = p.positive()[i].coeff.eval(t)?;
    if p.is_padded(i) {
        return Ok(pv);
    }
    let (c, rate) = kernel::composite_at(p, i, t, cfg.root_tol)?;
    let qv = p.negative()[i].coeff.eval(t - c)?;
    Ok(pv - qv * rate)
}

/// The transformed coefficient `P̄_i(t) = P_i(t) - Q_i(t - c_i(t))(1 - c_i'(t))`
/// at a single point. Exposed for diagnostics and spot checks; the analysis
/// itself tabulates these values internally.
pub fn transformed_coefficient(
    p: &NddeProblem,
    cfg: &AnalysisConfig,
    i: usize,
    t: f64,
) -> Result<f64, NumericError> {
    pbar_at(p, cfg, i, t)
}

/// The quotient `Ω_{i,j}(t) = R_j(t - τ_i) P̄_i(t) / P̄_i(t - r_j)` coupling
/// neutral term `j` to positive term `i`, defined for constant delays.
pub fn omega_ratio(
    p: &NddeProblem,
    cfg: &AnalysisConfig,
    i: usize,
    j: usize,
    t: f64,
) -> Result<f64, NumericError> {
    let tau = p.positive()[i].delay.eval(t)?;
    let r = p.neutral()[j].delay.eval(t)?;
    let num = p.neutral()[j].coeff.eval(t - tau)? * pbar_at(p, cfg, i, t)?;
    let den = pbar_at(p, cfg, i, t - r)?;
    if den.abs() < 1e-14 {
        return Err(NumericError::DivZero { t });
    }
    Ok(num / den)
}

/// Direct transform data: `P̄_i` tabulated on the tail grid, plus the
/// minimum over the wider scan range `[max(t0, tail_start - D), horizon]`
/// that the criterion integrals can reach into.
struct Direct {
    pbar: Vec<Vec<f64>>,
    min: f64,
    argmin: f64,
}

fn build_direct(p: &NddeProblem, cfg: &AnalysisConfig, grid: &[f64]) -> Result<Direct, String> {
    let n_p = p.n_p();
    let mut pbar = vec![vec![0.0; grid.len()]; n_p];
    let mut min = f64::INFINITY;
    let mut argmin = f64::NAN;
    let mut observe = |v: f64, t: f64| {
        if v < min {
            min = v;
            argmin = t;
        }
    };
    for (i, row) in pbar.iter_mut().enumerate() {
        for (j, &t) in grid.iter().enumerate() {
            let v =
                pbar_at(p, cfg, i, t).map_err(|e| format!("pbar[{}] at t = {t}: {e}", i + 1))?;
            row[j] = v;
            observe(v, t);
        }
    }
    let scan_lo = (cfg.tail_start - p.delay_bound()).max(p.t0());
    if scan_lo < cfg.tail_start {
        for t in uniform_grid(scan_lo, cfg.tail_start, cfg.grid_step) {
            for i in 0..n_p {
                let v = pbar_at(p, cfg, i, t)
                    .map_err(|e| format!("pbar[{}] at t = {t}: {e}", i + 1))?;
                observe(v, t);
            }
        }
    }
    Ok(Direct { pbar, min, argmin })
}

/// Lower bound on `P̄_i` that avoids the composite delay entirely:
/// `P_i(t) - (1 - τ_i'(t)) / (1 - Δ_i) · sup{Q_i(s) : s ∈ [t - D, t]}`
/// with `Δ_i` a grid bound on `δ_i'`. Valid only when strictly positive.
pub(crate) struct SupData {
    pub(crate) funcs: Vec<GridFn>,
    pub(crate) deltas: Vec<f64>,
}

pub(crate) fn build_sup_bound(p: &NddeProblem, cfg: &AnalysisConfig) -> Result<SupData, String> {
    let d = p.delay_bound();
    let lo_q = cfg.tail_start - 2.0 * d;
    if lo_q < p.t0() - 1e-12 {
        return Err(format!(
            "sup-bound window needs tail_start >= t0 + 2D = {}",
            p.t0() + 2.0 * d
        ));
    }
    let n_p = p.n_p();
    let vgrid = uniform_grid(p.t0(), cfg.horizon, cfg.grid_step);
    let mut deltas = vec![0.0; n_p];
    for (i, delta) in deltas.iter_mut().enumerate() {
        if p.is_padded(i) {
            continue;
        }
        let dp = p.delta_prime(i);
        for &t in &vgrid {
            let v = dp.eval(t).map_err(|e| format!("delta'[{}]: {e}", i + 1))?;
            if v > *delta {
                *delta = v;
            }
        }
        if 1.0 - *delta < 1e-9 {
            return Err(format!("delta'[{}] bound {} too close to 1", i + 1, delta));
        }
    }
    let gq = uniform_grid(lo_q, cfg.horizon, cfg.grid_step);
    let h = gq[1] - gq[0];
    let mut w = (d / h).ceil() as usize;
    while (w as f64) * h < d {
        w += 1;
    }
    if w + 1 >= gq.len() {
        return Err("sup-bound grid too coarse for the delay bound".to_string());
    }
    let mut funcs = Vec::with_capacity(n_p);
    let mut min = f64::INFINITY;
    let mut argmin = f64::NAN;
    for (i, (neg, pos)) in p.negative().iter().zip(p.positive()).enumerate() {
        let qs: Vec<f64> = gq
            .iter()
            .map(|&s| neg.coeff.eval(s))
            .collect::<Result<_, _>>()
            .map_err(|e| format!("Q[{}]: {e}", i + 1))?;
        let sup_q = kernel::moving_sup(&qs, w);
        let mut vals = Vec::with_capacity(sup_q.len());
        for (jj, &sq) in sup_q.iter().enumerate() {
            let s = gq[jj + w];
            let pv = pos
                .coeff
                .eval(s)
                .map_err(|e| format!("P[{}]: {e}", i + 1))?;
            let tp = p
                .tau_prime(i)
                .eval(s)
                .map_err(|e| format!("tau'[{}]: {e}", i + 1))?;
            if 1.0 - tp < 1e-9 {
                return Err(format!("tau'[{}] reaches 1 at t = {s}", i + 1));
            }
            let v = pv - (1.0 - tp) / (1.0 - deltas[i]) * sq;
            if v < min {
                min = v;
                argmin = s;
            }
            vals.push(v);
        }
        funcs.push(GridFn::new(gq[w], h, vals));
    }
    if !(min > 0.0) {
        return Err(format!(
            "sup-bound coefficient not positive: min {min:.6e} at t = {argmin}"
        ));
    }
    Ok(SupData { funcs, deltas })
}

enum Star {
    Direct,
    Sup(SupData),
    None { reasons: Vec<String> },
}

// ---------------------------------------------------------------------------
// Shared evaluation context.

struct Ax<'a> {
    p: &'a NddeProblem,
    cfg: &'a AnalysisConfig,
    grid: &'a [f64],
    direct: &'a Result<Direct, String>,
    star: &'a Star,
}

impl Ax<'_> {
    /// `P̄*_i` at a tail grid node.
    fn star_grid(&self, i: usize, j: usize) -> f64 {
        match self.star {
            Star::Direct => self.direct.as_ref().unwrap().pbar[i][j].max(0.0),
            Star::Sup(s) => s.funcs[i].value_at(self.grid[j]),
            Star::None { .. } => unreachable!("star queried while unavailable"),
        }
    }

    /// `P̄*_i` at an arbitrary time (quadrature nodes, shifted samples).
    fn star_at(&self, i: usize, t: f64) -> Result<f64, NumericError> {
        match self.star {
            Star::Direct => Ok(pbar_at(self.p, self.cfg, i, t)?.max(0.0)),
            Star::Sup(s) => Ok(s.funcs[i].value_at(t)),
            Star::None { .. } => unreachable!("star queried while unavailable"),
        }
    }

    fn star_int(&self, i: usize, a: f64, b: f64) -> Result<f64, NumericError> {
        match self.star {
            Star::Direct => kernel::integrate(|s| self.star_at(i, s), a, b, self.cfg.quad_tol),
            Star::Sup(s) => s.funcs[i].integral(a, b),
            Star::None { .. } => unreachable!("star queried while unavailable"),
        }
    }

    fn star_sum_int(&self, a: f64, b: f64) -> Result<f64, NumericError> {
        match self.star {
            Star::Direct => kernel::integrate(
                |s| {
                    let mut acc = 0.0;
                    for i in 0..self.p.n_p() {
                        acc += self.star_at(i, s)?;
                    }
                    Ok(acc)
                },
                a,
                b,
                self.cfg.quad_tol,
            ),
            Star::Sup(s) => {
                let mut acc = 0.0;
                for f in &s.funcs {
                    acc += f.integral(a, b)?;
                }
                Ok(acc)
            }
            Star::None { .. } => unreachable!("star queried while unavailable"),
        }
    }

    fn star_ok(&self) -> bool {
        !matches!(self.star, Star::None { .. })
    }

    fn taus(&self, t: f64) -> Result<Vec<f64>, NumericError> {
        self.p
            .positive()
            .iter()
            .map(|term| Ok(term.delay.eval(t)?))
            .collect()
    }
}

// ---------------------------------------------------------------------------
// Hypothesis checks.

struct H2Outcome {
    pre: Precondition,
    exact: Result<(f64, f64), String>,
    sufficient: Result<(f64, f64), String>,
}

const H2_SLACK: f64 = 1e-12;

fn check_h1(ax: &Ax) -> Precondition {
    if !ax.star_ok() {
        return pre("h1", false, "transformed coefficients unavailable".into());
    }
    let sums: Vec<f64> = (0..ax.grid.len())
        .map(|j| (0..ax.p.n_p()).map(|i| ax.star_grid(i, j)).sum())
        .collect();
    let est = kernel::tail_sup_of(&sums, ax.cfg.margin);
    let last = est.trend[kernel::TREND_LEN - 1];
    pre(
        "h1",
        last > 0.0,
        format!("sup of sum(pbar*) over the final trend window = {last:.6e}"),
    )
}

fn check_h2(p: &NddeProblem, cfg: &AnalysisConfig, grid: &[f64]) -> H2Outcome {
    let r_sum = |t: f64| -> Result<f64, NumericError> {
        let mut acc = 0.0;
        for term in p.neutral() {
            acc += term.coeff.eval(t)?;
        }
        Ok(acc)
    };
    let scan =
        |window: &dyn Fn(f64, usize) -> Result<f64, NumericError>| -> Result<(f64, f64), String> {
            let mut max = f64::NEG_INFINITY;
            let mut argmax = f64::NAN;
            for &t in grid {
                let mut lhs = r_sum(t).map_err(|e| e.to_string())?;
                for i in 0..p.n_q() {
                    let c = window(t, i).map_err(|e| e.to_string())?;
                    let q = &p.negative()[i].coeff;
                    lhs += kernel::integrate(|s| Ok(q.eval(s)?), t - c, t, cfg.quad_tol)
                        .map_err(|e| e.to_string())?;
                }
                if lhs > max {
                    max = lhs;
                    argmax = t;
                }
            }
            Ok((max, argmax))
        };
    let exact = scan(&|t, i| kernel::solve_composite(p, i, t, cfg.root_tol));
    let d = p.delay_bound();
    let sufficient = scan(&|_, _| Ok(d));
    let (pass, detail) = match (&exact, &sufficient) {
        (Ok((me, te)), Ok((ms, ts))) => (
            *me <= 1.0 + H2_SLACK,
            format!(
                "max over composite windows = {me:.9} at t = {te}; width-D form = {ms:.9} at t = {ts}"
            ),
        ),
        (Ok((me, te)), Err(es)) => (
            *me <= 1.0 + H2_SLACK,
            format!("max over composite windows = {me:.9} at t = {te}; width-D form failed: {es}"),
        ),
        (Err(ee), Ok((ms, ts))) => (
            *ms <= 1.0 + H2_SLACK,
            format!("composite windows failed ({ee}); width-D form = {ms:.9} at t = {ts}"),
        ),
        (Err(ee), Err(es)) => (
            false,
            format!("composite windows failed ({ee}); width-D form failed ({es})"),
        ),
    };
    H2Outcome {
        pre: pre("h2", pass, detail),
        exact,
        sufficient,
    }
}

// ---------------------------------------------------------------------------
// Contraction factor.

struct OmegaOutcome {
    value: Option<f64>,
    detail: String,
}

fn check_omega(ax: &Ax) -> OmegaOutcome {
    let p = ax.p;
    let no = |detail: String| OmegaOutcome {
        value: None,
        detail,
    };
    if p.n_r() == 0 {
        return no("no neutral terms".into());
    }
    if !p.delay_classification().0 {
        return no("delays are not all constant".into());
    }
    let direct = match ax.direct {
        Ok(d) => d,
        Err(e) => return no(format!("pbar unavailable: {e}")),
    };
    let taus: Vec<f64> = p
        .positive()
        .iter()
        .map(|term| term.delay.as_constant().unwrap())
        .collect();
    let rs: Vec<f64> = p
        .neutral()
        .iter()
        .map(|term| term.delay.as_constant().unwrap())
        .collect();
    let mut worst = f64::INFINITY;
    let mut detail = String::new();
    for (i, (&tau_i, pbar_i)) in taus.iter().zip(&direct.pbar).enumerate() {
        for (j, &rj) in rs.iter().enumerate() {
            let mut samples = Vec::with_capacity(ax.grid.len());
            for (jdx, &t) in ax.grid.iter().enumerate() {
                let den = match pbar_at(p, ax.cfg, i, t - rj) {
                    Ok(v) => v,
                    Err(e) => return no(format!("pbar[{}] at t = {}: {e}", i + 1, t - rj)),
                };
                if den.abs() < 1e-14 {
                    return no(format!(
                        "pbar[{}](t - r_{}) vanishes at t = {t}",
                        i + 1,
                        j + 1
                    ));
                }
                let rc = match p.neutral()[j].coeff.eval(t - tau_i) {
                    Ok(v) => v,
                    Err(e) => return no(format!("R[{}] at t = {}: {e}", j + 1, t - tau_i)),
                };
                samples.push(rc * pbar_i[jdx] / den);
            }
            let inf = kernel::tail_inf_of(&samples, ax.cfg.margin).value;
            if !detail.is_empty() {
                detail.push_str("; ");
            }
            detail.push_str(&format!("inf Omega[{},{}] = {inf:.9e}", i + 1, j + 1));
            if inf < worst {
                worst = inf;
            }
        }
    }
    let omega = worst - ax.cfg.omega_slack;
    let n_r = p.n_r() as f64;
    if !(omega > 0.0) {
        return no(format!("{detail}; omega = {omega:.6e} is not positive"));
    }
    if n_r * omega >= 1.0 {
        return no(format!("{detail}; N_r * omega = {:.6e} >= 1", n_r * omega));
    }
    OmegaOutcome {
        value: Some(omega),
        detail: format!("{detail}; omega = {omega:.12e}"),
    }
}

// ---------------------------------------------------------------------------
// Verdict assembly.

#[allow(clippy::too_many_arguments)]
fn finish(
    id: String,
    m: Option<usize>,
    threshold: f64,
    margin: f64,
    preconditions: Vec<Precondition>,
    tail: Option<TailEstimate>,
    slow_score: Option<f64>,
    mut notes: Vec<String>,
) -> CriterionReport {
    let all_pass = preconditions.iter().all(|c| c.pass);
    let verdict = match &tail {
        Some(est) if all_pass => {
            if est.value > threshold + margin && est.converged {
                Verdict::Oscillatory
            } else {
                Verdict::Inconclusive
            }
        }
        _ => Verdict::Inapplicable,
    };
    if let Some(est) = &tail {
        if (est.value - threshold).abs() <= 2.0 * margin {
            notes.push("margin-sensitive: statistic within 2*margin of threshold".to_string());
        }
        if all_pass && !est.converged {
            notes.push("tail trend has not converged".to_string());
        }
    }
    CriterionReport {
        id,
        m,
        statistic: tail.as_ref().map(|e| e.value),
        threshold,
        margin,
        verdict,
        preconditions,
        tail,
        slow_score,
        notes,
    }
}

fn inapplicable_family(
    ids: &[&str],
    threshold: f64,
    margin: f64,
    pres: &[Precondition],
) -> Vec<CriterionReport> {
    ids.iter()
        .map(|id| {
            finish(
                id.to_string(),
                None,
                threshold,
                margin,
                pres.to_vec(),
                None,
                None,
                Vec::new(),
            )
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Families.

/// Data produced while evaluating the pointwise and integral families that
/// the iterated criteria can reuse.
struct FamilyIOut {
    reports: Vec<CriterionReport>,
    /// `∫_{t-τ_i(t)}^t P̄*_i` per i on the tail grid, when computed.
    int_tau: Option<Vec<Vec<f64>>>,
}

fn family_i_and_slow(
    ax: &Ax,
    h1: &Precondition,
    h2: &Precondition,
    opts: &AnalyzeOptions,
) -> FamilyIOut {
    let cfg = ax.cfg;
    let margin = cfg.margin;
    let base_ids = ["A1", "B1", "C1", "D1", "A2", "B2", "C2"];
    let transform_pre = transform_precondition(ax);
    if !ax.star_ok() {
        let pres = vec![transform_pre, h1.clone(), h2.clone()];
        let mut rows = inapplicable_family(&base_ids[..4], ONE_OVER_E, margin, &pres);
        rows[3].threshold = 1.0;
        rows.extend(inapplicable_family(
            &base_ids[4..],
            ONE_OVER_E,
            margin,
            &pres,
        ));
        return FamilyIOut {
            reports: rows,
            int_tau: None,
        };
    }

    match family_i_compute(ax, h1, h2, opts, &transform_pre) {
        Ok(out) => out,
        Err(e) => {
            let pres = vec![
                transform_pre,
                h1.clone(),
                h2.clone(),
                pre("evaluation", false, format!("numeric failure: {e}")),
            ];
            let mut rows = inapplicable_family(&base_ids[..4], ONE_OVER_E, margin, &pres);
            rows[3].threshold = 1.0;
            rows.extend(inapplicable_family(
                &base_ids[4..],
                ONE_OVER_E,
                margin,
                &pres,
            ));
            FamilyIOut {
                reports: rows,
                int_tau: None,
            }
        }
    }
}

fn transform_precondition(ax: &Ax) -> Precondition {
    match ax.star {
        Star::Direct => pre("transform", true, "direct".into()),
        Star::Sup(_) => pre("transform", true, "sup-bound".into()),
        Star::None { reasons } => pre("transform", false, reasons.join("; ")),
    }
}

fn family_i_compute(
    ax: &Ax,
    h1: &Precondition,
    h2: &Precondition,
    opts: &AnalyzeOptions,
    transform_pre: &Precondition,
) -> Result<FamilyIOut, NumericError> {
    let p = ax.p;
    let cfg = ax.cfg;
    let margin = cfg.margin;
    let n_p = p.n_p();
    let n = ax.grid.len();

    let const_taus: Vec<Option<f64>> = p
        .positive()
        .iter()
        .map(|term| term.delay.as_constant())
        .collect();
    let all_tau_const = const_taus.iter().all(|c| c.is_some());

    // Per-term windows [t - tau_i(t), t] and the pointwise sums; shared by
    // A1/A2, the positivity preconditions, and (transitively) Am/Bm.
    let mut int_tau = vec![vec![0.0; n]; n_p];
    let mut pbtau = vec![0.0; n];
    for (j, &t) in ax.grid.iter().enumerate() {
        let taus = ax.taus(t)?;
        for i in 0..n_p {
            int_tau[i][j] = ax.star_int(i, t - taus[i], t)?;
            pbtau[j] += ax.star_grid(i, j) * taus[i];
        }
    }
    let sum_int_tau: Vec<f64> = (0..n)
        .map(|j| (0..n_p).map(|i| int_tau[i][j]).sum())
        .collect();

    // Windows [t - min_i tau_i(t), t] for C1/D1 and the default C2.
    let int_min: Vec<f64> = if n_p == 1 {
        int_tau[0].clone()
    } else {
        let mut v = vec![0.0; n];
        for (j, &t) in ax.grid.iter().enumerate() {
            let taus = ax.taus(t)?;
            let tmin = taus.iter().cloned().fold(f64::INFINITY, f64::min);
            v[j] = ax.star_sum_int(t - tmin, t)?;
        }
        v
    };

    let shared = |extra: Vec<Precondition>| -> Vec<Precondition> {
        let mut v = vec![transform_pre.clone(), h1.clone(), h2.clone()];
        v.extend(extra);
        v
    };
    let const_tau_pre = || {
        pre(
            "constant-tau",
            all_tau_const,
            if all_tau_const {
                "all tau_i constant".to_string()
            } else {
                "tau_i not all constant".to_string()
            },
        )
    };

    // A1: liminf of the summed windows, constant tau only.
    let mut reports = vec![finish(
        "A1".into(),
        None,
        ONE_OVER_E,
        margin,
        shared(vec![const_tau_pre()]),
        all_tau_const.then(|| kernel::tail_inf_of(&sum_int_tau, margin)),
        None,
        Vec::new(),
    )];

    // B1: liminf of sum(P̄*_i τ_i) pointwise.
    reports.push(finish(
        "B1".into(),
        None,
        ONE_OVER_E,
        margin,
        shared(Vec::new()),
        Some(kernel::tail_inf_of(&pbtau, margin)),
        None,
        Vec::new(),
    ));

    // C1 / D1: liminf and limsup over the shortest-delay windows.
    reports.push(finish(
        "C1".into(),
        None,
        ONE_OVER_E,
        margin,
        shared(Vec::new()),
        Some(kernel::tail_inf_of(&int_min, margin)),
        None,
        Vec::new(),
    ));
    reports.push(finish(
        "D1".into(),
        None,
        1.0,
        margin,
        shared(Vec::new()),
        Some(kernel::tail_sup_of(&int_min, margin)),
        None,
        Vec::new(),
    ));

    // Positivity needed by the slowly-varying family: liminf of each
    // per-term window integral must be positive.
    let mut pos_pass = true;
    let mut pos_detail = String::new();
    for (i, arr) in int_tau.iter().enumerate() {
        let inf = kernel::tail_inf_of(arr, margin).value;
        if !pos_detail.is_empty() {
            pos_detail.push_str("; ");
        }
        pos_detail.push_str(&format!("inf int[{}] = {inf:.6e}", i + 1));
        if !(inf > 0.0) {
            pos_pass = false;
        }
    }
    let positivity = pre("positivity", pos_pass, pos_detail);

    let slow_pre = |family: &str, score: f64| slow_pre_for(opts, family, score, margin);

    // A2: limsup of the same summed windows, constant tau, slowly varying.
    {
        let score = if all_tau_const {
            kernel::slow_variation_score(cfg, |t| {
                let mut acc = 0.0;
                for (i, ct) in const_taus.iter().enumerate() {
                    acc += ax.star_int(i, t - ct.unwrap(), t)?;
                }
                Ok(acc)
            })?
        } else {
            f64::INFINITY
        };
        let pres = shared(vec![
            positivity.clone(),
            const_tau_pre(),
            slow_pre("A2", score),
        ]);
        reports.push(finish(
            "A2".into(),
            None,
            ONE_OVER_E,
            margin,
            pres,
            all_tau_const.then(|| kernel::tail_sup_of(&sum_int_tau, margin)),
            Some(score),
            Vec::new(),
        ));
    }

    // B2: limsup of sum(P̄*_i τ_i), slowly varying.
    {
        let score = kernel::slow_variation_score(cfg, |t| {
            let mut acc = 0.0;
            for i in 0..n_p {
                acc += ax.star_at(i, t)? * p.positive()[i].delay.eval(t)?;
            }
            Ok(acc)
        })?;
        let pres = shared(vec![positivity.clone(), slow_pre("B2", score)]);
        reports.push(finish(
            "B2".into(),
            None,
            ONE_OVER_E,
            margin,
            pres,
            Some(kernel::tail_sup_of(&pbtau, margin)),
            Some(score),
            Vec::new(),
        ));
    }

    // C2: limsup over windows cut by the comparison delay tau_hat, which
    // defaults to min_i tau_i(t).
    {
        let mut extra = vec![positivity.clone()];
        let hat_at = |t: f64| -> Result<f64, NumericError> {
            match &opts.tau_hat {
                Some(h) => Ok(h.eval(t)?),
                None => {
                    let taus = ax.taus(t)?;
                    Ok(taus.iter().cloned().fold(f64::INFINITY, f64::min))
                }
            }
        };
        let mut hat_ok = true;
        if let Some(hat_expr) = &opts.tau_hat {
            let mut detail = "tau_hat within [0, min tau_i]".to_string();
            for &t in ax.grid {
                let hv = hat_expr.eval(t)?;
                let taus = ax.taus(t)?;
                let tmin = taus.iter().cloned().fold(f64::INFINITY, f64::min);
                if hv < 0.0 || hv > tmin + 1e-12 {
                    hat_ok = false;
                    detail = format!("tau_hat = {hv:.6e} outside [0, {tmin:.6e}] at t = {t}");
                    break;
                }
            }
            extra.push(pre("tau-hat", hat_ok, detail));
        }
        let samples: Option<Vec<f64>> = if !hat_ok {
            None
        } else if opts.tau_hat.is_none() {
            Some(int_min.clone())
        } else {
            let mut v = vec![0.0; n];
            for (j, &t) in ax.grid.iter().enumerate() {
                v[j] = ax.star_sum_int(t - hat_at(t)?, t)?;
            }
            Some(v)
        };
        let score = if samples.is_some() {
            kernel::slow_variation_score(cfg, |t| {
                let h = hat_at(t)?;
                ax.star_sum_int(t - h, t)
            })?
        } else {
            f64::INFINITY
        };
        extra.push(slow_pre("C2", score));
        reports.push(finish(
            "C2".into(),
            None,
            ONE_OVER_E,
            margin,
            shared(extra),
            samples.map(|v| kernel::tail_sup_of(&v, margin)),
            Some(score),
            Vec::new(),
        ));
    }

    Ok(FamilyIOut {
        reports,
        int_tau: Some(int_tau),
    })
}

/// Family-level inapplicable rows for the iterated criteria, with the
/// limsup threshold on `D3`.
fn const_family_inapplicable(margin: f64, pres: &[Precondition]) -> Vec<CriterionReport> {
    let mut rows = inapplicable_family(&["A3", "B3", "D3", "Am", "Bm"], ONE_OVER_E, margin, pres);
    rows[2].threshold = 1.0;
    rows
}

fn family_const(
    ax: &Ax,
    h2: &H2Outcome,
    omega: &OmegaOutcome,
    fam_i: &FamilyIOut,
    opts: &AnalyzeOptions,
) -> Vec<CriterionReport> {
    let p = ax.p;
    let cfg = ax.cfg;
    let margin = cfg.margin;

    let mut pres = Vec::new();
    let all_const = p.delay_classification().0;
    pres.push(pre(
        "constant-delays",
        all_const,
        if all_const {
            "all delays constant".to_string()
        } else {
            "delays vary".to_string()
        },
    ));
    if !all_const {
        return const_family_inapplicable(margin, &pres);
    }

    let direct = match ax.direct {
        Ok(d) => d,
        Err(e) => {
            pres.push(pre("pbar", false, format!("direct transform failed: {e}")));
            return const_family_inapplicable(margin, &pres);
        }
    };
    pres.push(pre("pbar", true, "direct".into()));

    let taus: Vec<f64> = p
        .positive()
        .iter()
        .map(|term| term.delay.as_constant().unwrap())
        .collect();
    let tau_pos = taus.iter().all(|&v| v > 0.0);
    pres.push(pre(
        "positive-tau",
        tau_pos,
        format!(
            "min tau = {:.6e}",
            taus.iter().cloned().fold(f64::INFINITY, f64::min)
        ),
    ));

    // Positivity of the untransformed P̄ over its full usable range
    // [t0 + D, horizon]; iterated windows never reach further left.
    let scan = uniform_grid(p.t0() + p.delay_bound(), cfg.horizon, cfg.grid_step);
    let mut scan_min = f64::INFINITY;
    let mut scan_argmin = f64::NAN;
    let mut scan_err = None;
    'outer: for i in 0..p.n_p() {
        for &t in &scan {
            match pbar_at(p, cfg, i, t) {
                Ok(v) => {
                    if v < scan_min {
                        scan_min = v;
                        scan_argmin = t;
                    }
                }
                Err(e) => {
                    scan_err = Some(format!("pbar[{}] at t = {t}: {e}", i + 1));
                    break 'outer;
                }
            }
        }
    }
    match scan_err {
        Some(e) => {
            pres.push(pre("pbar-positive", false, e));
            return const_family_inapplicable(margin, &pres);
        }
        None => {
            pres.push(pre(
                "pbar-positive",
                scan_min > 0.0,
                format!("min pbar = {scan_min:.6e} at t = {scan_argmin}"),
            ));
        }
    }

    // R+Q bound: with constant delays the composite windows are exact, so
    // this is the same quantity as the h2 check.
    match &h2.exact {
        Ok((max, at)) => pres.push(pre(
            "rq-bound",
            *max <= 1.0 + H2_SLACK,
            format!("max = {max:.9} at t = {at} (shared with h2)"),
        )),
        Err(e) => match &h2.sufficient {
            Ok((max, at)) => pres.push(pre(
                "rq-bound",
                *max <= 1.0 + H2_SLACK,
                format!("width-D form max = {max:.9} at t = {at}"),
            )),
            Err(e2) => pres.push(pre("rq-bound", false, format!("{e}; {e2}"))),
        },
    }

    // Pointwise nondegeneracy: on the tail grid, either R-sum + P̄-sum stays
    // positive or every summed short window does.
    {
        let mut holds = true;
        let mut detail = "R-sum + pbar-sum positive on tail".to_string();
        'scan: for (j, &t) in ax.grid.iter().enumerate() {
            let mut acc: f64 = (0..p.n_p()).map(|i| direct.pbar[i][j]).sum();
            for term in p.neutral() {
                match term.coeff.eval(t) {
                    Ok(v) => acc += v,
                    Err(e) => {
                        holds = false;
                        detail = format!("R eval failed at t = {t}: {e}");
                        break 'scan;
                    }
                }
            }
            if !(acc > 0.0) {
                holds = false;
                detail = format!("R-sum + pbar-sum = {acc:.6e} at t = {t}");
                break;
            }
        }
        if holds {
            pres.push(pre("nondegeneracy", true, detail));
        } else {
            let second = fam_i.int_tau.as_ref().map(|arr| {
                (0..ax.grid.len()).all(|j| (0..p.n_p()).map(|i| arr[i][j]).sum::<f64>() > 0.0)
            });
            match second {
                Some(true) => pres.push(pre(
                    "nondegeneracy",
                    true,
                    format!("{detail}; summed short windows positive instead"),
                )),
                _ => pres.push(pre("nondegeneracy", false, detail)),
            }
        }
    }

    let omega_val = match omega.value {
        Some(v) => {
            pres.push(pre("omega", true, omega.detail.clone()));
            v
        }
        None => {
            pres.push(pre("omega", false, omega.detail.clone()));
            return const_family_inapplicable(margin, &pres);
        }
    };
    if pres.iter().any(|c| !c.pass) {
        return const_family_inapplicable(margin, &pres);
    }

    // All family-level preconditions hold; sweep the iteration depth.
    let r0 = p
        .neutral()
        .iter()
        .map(|term| term.delay.as_constant().unwrap())
        .fold(f64::INFINITY, f64::min);
    let tau0 = taus.iter().cloned().fold(f64::INFINITY, f64::min);
    let taumax = taus.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let n_r = p.n_r() as f64;
    let contraction = n_r * omega_val;

    let positivity = am_positivity(fam_i, margin);

    let mut rows_a3 = Vec::new();
    let mut rows_b3 = Vec::new();
    let mut rows_d3 = Vec::new();
    let mut rows_am = Vec::new();
    let mut rows_bm = Vec::new();

    for m in 0..=cfg.m_max {
        let mf = m as f64;
        let prefactor = contraction.powi(m as i32) / (1.0 - contraction);
        let lower_need = p.t0() + p.delay_bound() + mf * r0 + taumax;
        let j0 = ax.grid.partition_point(|&t| t < lower_need - 1e-12);
        let window_pre = pre(
            "window",
            j0 < ax.grid.len(),
            format!("windows need t >= {lower_need:.6}"),
        );
        let mut pres_m = pres.clone();
        pres_m.push(window_pre);
        let sub = &ax.grid[j0..];

        if sub.is_empty() {
            for (rows, id, thr) in [
                (&mut rows_a3, "A3", ONE_OVER_E),
                (&mut rows_d3, "D3", 1.0),
                (&mut rows_am, "Am", ONE_OVER_E),
            ] {
                rows.push(finish(
                    format!("{id}({m})"),
                    Some(m),
                    thr,
                    margin,
                    pres_m.clone(),
                    None,
                    None,
                    Vec::new(),
                ));
            }
        } else {
            let windows = compute_const_windows(ax, &taus, tau0, r0, mf, prefactor, sub);
            match windows {
                Ok((a3, d3)) => {
                    rows_a3.push(finish(
                        format!("A3({m})"),
                        Some(m),
                        ONE_OVER_E,
                        margin,
                        pres_m.clone(),
                        Some(kernel::tail_inf_of(&a3, margin)),
                        None,
                        Vec::new(),
                    ));
                    rows_d3.push(finish(
                        format!("D3({m})"),
                        Some(m),
                        1.0,
                        margin,
                        pres_m.clone(),
                        Some(kernel::tail_sup_of(&d3, margin)),
                        None,
                        Vec::new(),
                    ));
                    let am_score = kernel::slow_variation_score(cfg, |t| {
                        let mut acc = 0.0;
                        for (i, &tau) in taus.iter().enumerate() {
                            acc += kernel::integrate(
                                |s| pbar_at(p, cfg, i, s),
                                t - mf * r0 - tau,
                                t,
                                cfg.quad_tol,
                            )?;
                        }
                        Ok(prefactor * acc)
                    });
                    let (am_score, am_note) = match am_score {
                        Ok(s) => (s, None),
                        Err(e) => (f64::INFINITY, Some(format!("slow score failed: {e}"))),
                    };
                    let mut pres_am = pres_m.clone();
                    pres_am.push(positivity.clone());
                    pres_am.push(slow_pre_for(opts, "Am", am_score, margin));
                    rows_am.push(finish(
                        format!("Am({m})"),
                        Some(m),
                        ONE_OVER_E,
                        margin,
                        pres_am,
                        Some(kernel::tail_sup_of(&a3, margin)),
                        Some(am_score),
                        am_note.into_iter().collect(),
                    ));
                }
                Err(e) => {
                    let mut pres_err = pres_m.clone();
                    pres_err.push(pre("evaluation", false, format!("numeric failure: {e}")));
                    for (rows, id, thr) in [
                        (&mut rows_a3, "A3", ONE_OVER_E),
                        (&mut rows_d3, "D3", 1.0),
                        (&mut rows_am, "Am", ONE_OVER_E),
                    ] {
                        rows.push(finish(
                            format!("{id}({m})"),
                            Some(m),
                            thr,
                            margin,
                            pres_err.clone(),
                            None,
                            None,
                            Vec::new(),
                        ));
                    }
                }
            }
        }

        // Pointwise rows are window-free and use the whole tail grid.
        let b3: Vec<f64> = (0..ax.grid.len())
            .map(|j| {
                prefactor
                    * (0..p.n_p())
                        .map(|i| direct.pbar[i][j] * (mf * r0 + taus[i]))
                        .sum::<f64>()
            })
            .collect();
        rows_b3.push(finish(
            format!("B3({m})"),
            Some(m),
            ONE_OVER_E,
            margin,
            pres.clone(),
            Some(kernel::tail_inf_of(&b3, margin)),
            None,
            Vec::new(),
        ));
        let bm_score = kernel::slow_variation_score(cfg, |t| {
            let mut acc = 0.0;
            for (i, &tau) in taus.iter().enumerate() {
                acc += pbar_at(p, cfg, i, t)? * (mf * r0 + tau);
            }
            Ok(prefactor * acc)
        });
        let (bm_score, bm_note) = match bm_score {
            Ok(s) => (s, None),
            Err(e) => (f64::INFINITY, Some(format!("slow score failed: {e}"))),
        };
        let mut pres_bm = pres.clone();
        pres_bm.push(positivity.clone());
        pres_bm.push(slow_pre_for(opts, "Bm", bm_score, margin));
        rows_bm.push(finish(
            format!("Bm({m})"),
            Some(m),
            ONE_OVER_E,
            margin,
            pres_bm,
            Some(kernel::tail_sup_of(&b3, margin)),
            Some(bm_score),
            bm_note.into_iter().collect(),
        ));
    }

    let mut out = rows_a3;
    out.extend(rows_b3);
    out.extend(rows_d3);
    out.extend(rows_am);
    out.extend(rows_bm);
    out
}

/// Windowed statistics for one iteration depth: the per-term long windows
/// (summed) and the shortest-delay long window, both prefactor-scaled.
fn compute_const_windows(
    ax: &Ax,
    taus: &[f64],
    tau0: f64,
    r0: f64,
    mf: f64,
    prefactor: f64,
    sub: &[f64],
) -> Result<(Vec<f64>, Vec<f64>), NumericError> {
    let p = ax.p;
    let cfg = ax.cfg;
    let mut a3 = Vec::with_capacity(sub.len());
    let mut d3 = Vec::with_capacity(sub.len());
    let single = p.n_p() == 1;
    for &t in sub {
        let mut acc = 0.0;
        for (i, &tau) in taus.iter().enumerate() {
            acc += kernel::integrate(
                |s| pbar_at(p, cfg, i, s),
                t - mf * r0 - tau,
                t,
                cfg.quad_tol,
            )?;
        }
        a3.push(prefactor * acc);
        if single {
            d3.push(prefactor * acc);
        } else {
            let v = kernel::integrate(
                |s| {
                    let mut sum = 0.0;
                    for i in 0..p.n_p() {
                        sum += pbar_at(p, cfg, i, s)?;
                    }
                    Ok(sum)
                },
                t - mf * r0 - tau0,
                t,
                cfg.quad_tol,
            )?;
            d3.push(prefactor * v);
        }
    }
    Ok((a3, d3))
}

fn am_positivity(fam_i: &FamilyIOut, margin: f64) -> Precondition {
    match &fam_i.int_tau {
        Some(arr) => {
            let mut pass = true;
            let mut detail = String::new();
            for (i, a) in arr.iter().enumerate() {
                let inf = kernel::tail_inf_of(a, margin).value;
                if !detail.is_empty() {
                    detail.push_str("; ");
                }
                detail.push_str(&format!("inf int[{}] = {inf:.6e}", i + 1));
                if !(inf > 0.0) {
                    pass = false;
                }
            }
            pre("positivity", pass, detail)
        }
        None => pre(
            "positivity",
            false,
            "per-term window integrals unavailable".into(),
        ),
    }
}

fn slow_pre_for(opts: &AnalyzeOptions, family: &str, score: f64, margin: f64) -> Precondition {
    if opts.asserts(family) {
        pre(
            "slow-variation",
            true,
            format!("asserted by caller (score = {score:.6e})"),
        )
    } else {
        pre(
            "slow-variation",
            score <= margin,
            format!("score = {score:.6e}, margin = {margin:.6e}"),
        )
    }
}

// ---------------------------------------------------------------------------
// Entry point.

/// Evaluates every criterion against `problem` and aggregates the verdicts.
///
/// Never fails: evaluation problems degrade the affected criteria to
/// `INAPPLICABLE` with the failure recorded in their preconditions or notes.
pub fn analyze_all(
    problem: &NddeProblem,
    cfg: &AnalysisConfig,
    opts: &AnalyzeOptions,
) -> AnalysisReport {
    let grid = kernel::tail_grid(cfg);
    let direct = build_direct(problem, cfg, &grid);

    let mut notes = Vec::new();
    let star = match &direct {
        Ok(d) if d.min >= 0.0 => Star::Direct,
        other => {
            let first_reason = match other {
                Ok(d) => format!("pbar negative: min {:.6e} at t = {}", d.min, d.argmin),
                Err(e) => format!("direct transform failed: {e}"),
            };
            match build_sup_bound(problem, cfg) {
                Ok(s) => {
                    notes.push(format!(
                        "direct transform rejected ({first_reason}); using sup-bound"
                    ));
                    Star::Sup(s)
                }
                Err(e2) => Star::None {
                    reasons: vec![first_reason, format!("sup-bound failed: {e2}")],
                },
            }
        }
    };
    let (transform_mode, transform_detail) = match &star {
        Star::Direct => ("direct".to_string(), {
            let d = direct.as_ref().unwrap();
            format!("min pbar = {:.6e} at t = {}", d.min, d.argmin)
        }),
        Star::Sup(s) => (
            "sup-bound".to_string(),
            format!(
                "delta-prime bounds: {}",
                s.deltas
                    .iter()
                    .map(|d| format!("{d:.6e}"))
                    .collect::<Vec<_>>()
                    .join(", ")
            ),
        ),
        Star::None { reasons } => ("unavailable".to_string(), reasons.join("; ")),
    };

    let ax = Ax {
        p: problem,
        cfg,
        grid: &grid,
        direct: &direct,
        star: &star,
    };

    let h1 = check_h1(&ax);
    let h2 = check_h2(problem, cfg, &grid);
    let omega = check_omega(&ax);

    let fam_i = family_i_and_slow(&ax, &h1, &h2.pre, opts);
    let const_rows = family_const(&ax, &h2, &omega, &fam_i, opts);

    let mut criteria = fam_i.reports;
    criteria.extend(const_rows);

    let overall = if criteria.iter().any(|c| c.verdict == Verdict::Oscillatory) {
        Verdict::Oscillatory
    } else if criteria.iter().any(|c| c.verdict == Verdict::Inconclusive) {
        Verdict::Inconclusive
    } else {
        Verdict::Inapplicable
    };

    let (all_const, delta_const) = problem.delay_classification();
    AnalysisReport {
        overall,
        margin: cfg.margin,
        delay_bound: problem.delay_bound(),
        all_delays_constant: all_const,
        delta_constant: delta_const,
        transform_mode,
        transform_detail,
        h1,
        h2: h2.pre,
        omega: omega.value,
        omega_detail: omega.detail,
        criteria,
        notes,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_problem, ProblemSpec, Term};

    fn term(coeff: &str, delay: &str) -> Term {
        Term::new(Expr::parse(coeff).unwrap(), Expr::parse(delay).unwrap())
    }

    fn find<'a>(report: &'a AnalysisReport, id: &str) -> &'a CriterionReport {
        report
            .criteria
            .iter()
            .find(|c| c.id == id)
            .unwrap_or_else(|| panic!("criterion {id} missing"))
    }

    /// Periodic coefficients with constant delays: the transform collapses
    /// to an exactly constant coefficient and the iterated sweep beats the
    /// plain integral criteria.
    fn const_delay_spec() -> ProblemSpec {
        ProblemSpec {
            t0: 0.0,
            neutral: vec![term("1/3", "2")],
            positive: vec![term("cos(2*t)+2", "0.5")],
            negative: vec![term("cos(2*t+0.5)+1.5", "0.25")],
        }
    }

    #[test]
    fn constant_transform_and_iterated_sweep() {
        let mut cfg = AnalysisConfig::new(5.0, 40.0, 0.01);
        cfg.m_max = 4;
        let problem = build_problem(&const_delay_spec(), &cfg).unwrap();
        let report = analyze_all(&problem, &cfg, &AnalyzeOptions::default());

        assert_eq!(report.transform_mode, "direct");
        for &t in &[6.0, 13.37, 25.0] {
            let v = pbar_at(&problem, &cfg, 0, t).unwrap();
            assert!((v - 0.5).abs() < 1e-9, "pbar at {t} = {v}");
        }

        let omega = report.omega.expect("omega should be available");
        assert!(
            (omega - (1.0 / 3.0 - cfg.omega_slack)).abs() < 1e-8,
            "omega = {omega}"
        );

        for id in ["A1", "B1", "C1"] {
            let row = find(&report, id);
            assert_eq!(row.verdict, Verdict::Inconclusive, "{id}");
            let stat = row.statistic.unwrap();
            assert!((stat - 0.25).abs() < 1e-3, "{id} = {stat}");
        }
        let d1 = find(&report, "D1");
        assert_eq!(d1.verdict, Verdict::Inconclusive);
        assert_eq!(d1.threshold, 1.0);

        let a32 = find(&report, "A3(2)");
        assert_eq!(a32.verdict, Verdict::Oscillatory);
        let stat = a32.statistic.unwrap();
        assert!((stat - 0.375).abs() < 1e-3, "A3(2) = {stat}");
        assert!(a32.tail.as_ref().unwrap().converged);

        let a33 = find(&report, "A3(3)");
        assert_eq!(a33.verdict, Verdict::Inconclusive);

        for m in 0..=4 {
            let row = find(&report, &format!("D3({m})"));
            assert_eq!(row.verdict, Verdict::Inconclusive, "D3({m})");
            assert!(row.statistic.unwrap() < 1.0);
        }

        assert_eq!(report.overall, Verdict::Oscillatory);
    }

    /// Exponentially vanishing neutral coefficient: the contraction factor
    /// collapses to zero, so the iterated family is inapplicable while the
    /// plain integral criterion fires.
    #[test]
    fn vanishing_neutral_coefficient_disables_iteration() {
        let spec = ProblemSpec {
            t0: 1.0,
            neutral: vec![term("exp(-t)", "2*pi")],
            positive: vec![term("3", "1"), term("sin(t)+1.5", "2")],
            negative: vec![term("1", "0.5")],
        };
        // The horizon must leave the final trend window (a sixteenth of the
        // tail span) longer than the coefficient period, or the trend never
        // counts as converged.
        let cfg = AnalysisConfig::new(15.0, 220.0, 0.02);
        let problem = build_problem(&spec, &cfg).unwrap();
        let report = analyze_all(&problem, &cfg, &AnalyzeOptions::default());

        assert!(report.omega.is_none(), "omega: {}", report.omega_detail);

        let a1 = find(&report, "A1");
        assert_eq!(a1.verdict, Verdict::Oscillatory);
        let expect = 5.0 - 2.0 * 1f64.sin();
        let stat = a1.statistic.unwrap();
        assert!((stat - expect).abs() < 2e-3, "A1 = {stat}, want {expect}");

        // Family rows collapse to single inapplicable entries.
        let a3 = find(&report, "A3");
        assert_eq!(a3.verdict, Verdict::Inapplicable);
        assert!(a3.m.is_none());
        assert!(a3
            .preconditions
            .iter()
            .any(|p| p.name == "omega" && !p.pass));

        // The wobbling coefficient defeats the slow-variation gate.
        let a2 = find(&report, "A2");
        assert_eq!(a2.verdict, Verdict::Inapplicable);
        assert!(a2
            .preconditions
            .iter()
            .any(|p| p.name == "slow-variation" && !p.pass));

        assert_eq!(report.overall, Verdict::Oscillatory);

        // H2 passes through the exact composite windows even though the
        // width-D sufficient form is violated (the window spans 2*pi).
        assert!(report.h2.pass, "h2: {}", report.h2.detail);
        assert!(report.h2.detail.contains("width-D"));
    }

    #[test]
    fn explicit_zero_padding_changes_nothing() {
        let base = ProblemSpec {
            t0: 1.0,
            neutral: vec![term("exp(-t)", "2*pi")],
            positive: vec![term("3", "1"), term("sin(t)+1.5", "2")],
            negative: vec![term("1", "0.5")],
        };
        let padded = ProblemSpec {
            negative: vec![term("1", "0.5"), term("0", "0")],
            ..base.clone()
        };
        let cfg = AnalysisConfig::new(15.0, 60.0, 0.05);
        let a = analyze_all(
            &build_problem(&base, &cfg).unwrap(),
            &cfg,
            &AnalyzeOptions::default(),
        );
        let b = analyze_all(
            &build_problem(&padded, &cfg).unwrap(),
            &cfg,
            &AnalyzeOptions::default(),
        );
        assert_eq!(a, b);
    }

    #[test]
    fn negative_pbar_disables_both_transforms() {
        let spec = ProblemSpec {
            t0: 0.0,
            neutral: vec![term("0.1", "1")],
            positive: vec![term("0.3", "1")],
            negative: vec![term("0.35", "0.5")],
        };
        let cfg = AnalysisConfig::new(2.5, 30.0, 0.01);
        let problem = build_problem(&spec, &cfg).unwrap();
        let report = analyze_all(&problem, &cfg, &AnalyzeOptions::default());

        assert_eq!(report.transform_mode, "unavailable");
        let b1 = find(&report, "B1");
        assert_eq!(b1.verdict, Verdict::Inapplicable);
        let tp = b1
            .preconditions
            .iter()
            .find(|p| p.name == "transform")
            .unwrap();
        assert!(!tp.pass);
        assert!(tp.detail.contains("pbar negative"));
        assert!(tp.detail.contains("sup-bound"));

        // Constant-delay family fails on the same positivity problem.
        let a3 = find(&report, "A3");
        assert_eq!(a3.verdict, Verdict::Inapplicable);
        assert!(a3
            .preconditions
            .iter()
            .any(|p| p.name == "pbar-positive" && !p.pass));

        assert_eq!(report.overall, Verdict::Inapplicable);
    }

    #[test]
    fn sup_bound_matches_windowed_maximum() {
        let spec = ProblemSpec {
            t0: 0.0,
            neutral: vec![term("0.05", "2")],
            positive: vec![term("1", "1")],
            negative: vec![term("0.2+0.1*sin(t)", "0.3")],
        };
        let cfg = AnalysisConfig::new(4.0, 30.0, 0.01);
        let problem = build_problem(&spec, &cfg).unwrap();
        let sup = build_sup_bound(&problem, &cfg).unwrap();
        assert_eq!(sup.deltas, vec![0.0]);

        let q = |s: f64| 0.2 + 0.1 * s.sin();
        let d = problem.delay_bound();
        for &t in &[5.0, 10.0, 17.3, 29.0] {
            let mut naive = f64::NEG_INFINITY;
            let steps = 4000;
            for k in 0..=steps {
                let s = t - d + d * (k as f64) / (steps as f64);
                naive = naive.max(q(s));
            }
            let got = sup.funcs[0].value_at(t);
            let want = 1.0 - naive;
            assert!((got - want).abs() < 1e-4, "t = {t}: {got} vs {want}");
        }

        let got = sup.funcs[0].integral(5.0, 9.0).unwrap();
        let mut naive = 0.0;
        let steps = 40000;
        let h = 4.0 / steps as f64;
        for k in 0..steps {
            let s = 5.0 + (k as f64 + 0.5) * h;
            let mut w = f64::NEG_INFINITY;
            for kk in 0..=400 {
                w = w.max(q(s - d + d * (kk as f64) / 400.0));
            }
            naive += h * (1.0 - w);
        }
        assert!((got - naive).abs() < 1e-3, "{got} vs {naive}");
    }

    #[test]
    fn custom_comparison_delay() {
        let cfg = AnalysisConfig::new(5.0, 40.0, 0.01);
        let problem = build_problem(&const_delay_spec(), &cfg).unwrap();

        let opts = AnalyzeOptions {
            tau_hat: Some(Expr::parse("0.1").unwrap()),
            ..Default::default()
        };
        let report = analyze_all(&problem, &cfg, &opts);
        let c2 = find(&report, "C2");
        assert_eq!(c2.verdict, Verdict::Inconclusive);
        let stat = c2.statistic.unwrap();
        assert!((stat - 0.05).abs() < 1e-3, "C2 = {stat}");

        let opts = AnalyzeOptions {
            tau_hat: Some(Expr::parse("0.6").unwrap()),
            ..Default::default()
        };
        let report = analyze_all(&problem, &cfg, &opts);
        let c2 = find(&report, "C2");
        assert_eq!(c2.verdict, Verdict::Inapplicable);
        assert!(c2
            .preconditions
            .iter()
            .any(|p| p.name == "tau-hat" && !p.pass));
    }

    #[test]
    fn asserted_slow_variation_overrides_score() {
        let spec = ProblemSpec {
            t0: 1.0,
            neutral: vec![term("exp(-t)", "2*pi")],
            positive: vec![term("3", "1"), term("sin(t)+1.5", "2")],
            negative: vec![term("1", "0.5")],
        };
        let cfg = AnalysisConfig::new(15.0, 60.0, 0.05);
        let problem = build_problem(&spec, &cfg).unwrap();
        let opts = AnalyzeOptions {
            assert_slow: vec!["B2".to_string()],
            ..Default::default()
        };
        let report = analyze_all(&problem, &cfg, &opts);
        let b2 = find(&report, "B2");
        let slow = b2
            .preconditions
            .iter()
            .find(|p| p.name == "slow-variation")
            .unwrap();
        assert!(slow.pass);
        assert!(slow.detail.contains("asserted"));
        assert!(b2.slow_score.unwrap() > cfg.margin);
    }
}
