//! Numerical machinery shared by the analysis and simulation layers:
//! adaptive quadrature, the composite-delay geometry, tail extremum
//! estimation with a convergence trend, moving suprema, and the
//! slow-variation score.
//!
//! The composite delay `c_i(t)` is the solution of
//!
//! ```text
//! c = τ_i(t) - δ_i(t - c)
//! ```
//!
//! which exists and is unique in `[0, D]` whenever `δ_i <= τ_i` and
//! `δ_i' < 1`: the residual `F(c) = c - τ_i(t) + δ_i(t - c)` is strictly
//! increasing in `c` with `F(0) <= 0` and `F(D) >= 0`. Its rate enters the
//! transformed coefficients through
//!
//! ```text
//! 1 - c_i'(t) = (1 - τ_i'(t)) / (1 - δ_i'(t - c_i(t)))
//! ```

use crate::expr::{EvalError, Expr};
use crate::model::{AnalysisConfig, NddeProblem};
use std::collections::VecDeque;

/// Failure of a numerical operation. Produced by the quadrature, the
/// composite-delay solve, the criteria evaluators, and the simulator.
#[derive(Debug, Clone, thiserror::Error)]
pub enum NumericError {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("integrand is not finite at t = {t}")]
    NonFinite { t: f64 },
    #[error("invalid integration interval [{a}, {b}]")]
    InvalidInterval { a: f64, b: f64 },
    #[error("quadrature did not converge on [{a}, {b}]")]
    MaxDepth { a: f64, b: f64 },
    #[error("composite-delay solve failed to bracket a root at t = {t}")]
    Bracket { t: f64 },
    #[error("composite-delay residual {residual} exceeds the tolerance at t = {t}")]
    Residual { t: f64, residual: f64 },
    #[error("composite delay is degenerate (delta' too close to 1) at t = {t}")]
    Degenerate { t: f64 },
    #[error("transformed coefficient vanishes at t = {t}; iteration ratio undefined")]
    DivZero { t: f64 },
    #[error("step size {dt} exceeds the stability bound {limit} (min neutral delay / 4)")]
    StepTooLarge { dt: f64, limit: f64 },
    #[error("solution magnitude exceeded 1e12 at t = {t}")]
    Blowup { t: f64 },
}

/// Uniform grid over `[a, b]` with spacing at most `step`; both endpoints
/// are grid points.
pub(crate) fn uniform_grid(a: f64, b: f64, step: f64) -> Vec<f64> {
    let n = (((b - a) / step).ceil() as usize).max(1);
    let h = (b - a) / n as f64;
    (0..=n).map(|k| a + h * k as f64).collect()
}

// 15-point Kronrod extension of 7-point Gauss–Legendre on [-1, 1]:
// positive abscissae in descending order (odd indices are the Gauss
// points), the matching Kronrod weights, and the Gauss weights.
#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991455371120812639,
    0.949107912342758525,
    0.864864423359769073,
    0.741531185599394440,
    0.586087235467691130,
    0.405845151377397167,
    0.207784955007898468,
    0.000000000000000000,
];
#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022935322010529225,
    0.063092092629978553,
    0.104790010322250184,
    0.140653259715525919,
    0.169004726639267903,
    0.190350578064785410,
    0.204432940075298892,
    0.209482141084727828,
];
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129484966168869693,
    0.279705391489276668,
    0.381830050505118945,
    0.417959183673469388,
];

const MAX_QUAD_DEPTH: usize = 48;

fn sample<F>(f: &mut F, t: f64) -> Result<f64, NumericError>
where
    F: FnMut(f64) -> Result<f64, NumericError>,
{
    let v = f(t)?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(NumericError::NonFinite { t })
    }
}

fn qk15<F>(f: &mut F, a: f64, b: f64) -> Result<(f64, f64), NumericError>
where
    F: FnMut(f64) -> Result<f64, NumericError>,
{
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = sample(f, mid)?;
    let mut kron = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for (j, (&x, &wk)) in XGK[..7].iter().zip(&WGK[..7]).enumerate() {
        let dx = half * x;
        let lo = sample(f, mid - dx)?;
        let hi = sample(f, mid + dx)?;
        kron += wk * (lo + hi);
        if j % 2 == 1 {
            gauss += WG[j / 2] * (lo + hi);
        }
    }
    Ok((kron * half, ((kron - gauss) * half).abs()))
}

fn adapt<F>(
    f: &mut F,
    a: f64,
    b: f64,
    tol: f64,
    total: f64,
    depth: usize,
) -> Result<f64, NumericError>
where
    F: FnMut(f64) -> Result<f64, NumericError>,
{
    let (value, err) = qk15(f, a, b)?;
    if err <= tol * ((b - a) / total) {
        return Ok(value);
    }
    if depth >= MAX_QUAD_DEPTH {
        return Err(NumericError::MaxDepth { a, b });
    }
    let mid = 0.5 * (a + b);
    Ok(adapt(f, a, mid, tol, total, depth + 1)? + adapt(f, mid, b, tol, total, depth + 1)?)
}

/// Adaptive Gauss–Kronrod integration of `f` over `[a, b]`.
///
/// `tol` is an absolute budget for the whole interval; each panel is
/// accepted when its Kronrod/Gauss discrepancy fits its proportional share.
/// An empty interval integrates to zero; `b < a` is rejected. Integrand
/// errors propagate unchanged, so domain failures keep their location.
pub fn integrate<F>(mut f: F, a: f64, b: f64, tol: f64) -> Result<f64, NumericError>
where
    F: FnMut(f64) -> Result<f64, NumericError>,
{
    if !a.is_finite() || !b.is_finite() || b < a {
        return Err(NumericError::InvalidInterval { a, b });
    }
    if a == b {
        return Ok(0.0);
    }
    adapt(&mut f, a, b, tol, b - a, 0)
}

/// Solves `c = τ_i(t) - δ_i(t - c)` for the i-th pair at time `t`.
///
/// Constant `δ_i` (padded terms included) short-circuits to the exact
/// difference; otherwise the residual is bisected over `[0, max(D, τ_i(t))]`.
pub fn solve_composite(
    problem: &NddeProblem,
    i: usize,
    t: f64,
    root_tol: f64,
) -> Result<f64, NumericError> {
    let tau_t = problem.positive()[i].delay.eval(t)?;
    let delta = &problem.negative()[i].delay;
    if let Some(d0) = delta.as_constant() {
        let c = tau_t - d0;
        if c < -root_tol {
            return Err(NumericError::Bracket { t });
        }
        return Ok(c.max(0.0));
    }
    solve_composite_bisect(tau_t, delta, t, problem.delay_bound(), root_tol)
}

/// General bisection path behind [`solve_composite`]; kept callable on its
/// own so the constant-`δ` specialization can be cross-checked against it.
pub(crate) fn solve_composite_bisect(
    tau_t: f64,
    delta: &Expr,
    t: f64,
    d: f64,
    root_tol: f64,
) -> Result<f64, NumericError> {
    let g = |c: f64| -> Result<f64, NumericError> { Ok(c - tau_t + delta.eval(t - c)?) };
    let mut lo = 0.0f64;
    let mut hi = d.max(tau_t);
    let g_lo = g(lo)?;
    if g_lo > 0.0 {
        return if g_lo <= root_tol {
            Ok(0.0)
        } else {
            Err(NumericError::Bracket { t })
        };
    }
    let g_hi = g(hi)?;
    if g_hi < 0.0 {
        return if -g_hi <= root_tol {
            Ok(hi)
        } else {
            Err(NumericError::Bracket { t })
        };
    }
    let mut c = 0.5 * (lo + hi);
    for _ in 0..200 {
        let gc = g(c)?;
        if gc.abs() <= 0.9 * root_tol {
            return Ok(c);
        }
        if gc > 0.0 {
            hi = c;
        } else {
            lo = c;
        }
        c = 0.5 * (lo + hi);
        if hi - lo <= f64::EPSILON * hi.abs().max(1.0) {
            break;
        }
    }
    let residual = g(c)?.abs();
    if residual <= root_tol {
        Ok(c)
    } else {
        Err(NumericError::Residual { t, residual })
    }
}

/// The factor `1 - c_i'(t)` given an already-solved composite delay `c`.
pub fn one_minus_c_prime(
    problem: &NddeProblem,
    i: usize,
    t: f64,
    c: f64,
) -> Result<f64, NumericError> {
    let tau_p = problem.tau_prime(i).eval(t)?;
    let delta_p = problem.delta_prime(i).eval(t - c)?;
    let denom = 1.0 - delta_p;
    if denom < 1e-9 {
        return Err(NumericError::Degenerate { t });
    }
    Ok((1.0 - tau_p) / denom)
}

/// Composite delay and its rate factor in one call: `(c_i(t), 1 - c_i'(t))`.
pub fn composite_at(
    problem: &NddeProblem,
    i: usize,
    t: f64,
    root_tol: f64,
) -> Result<(f64, f64), NumericError> {
    let c = solve_composite(problem, i, t, root_tol)?;
    let rate = one_minus_c_prime(problem, i, t, c)?;
    Ok((c, rate))
}

/// Number of entries in a [`TailEstimate`] trend.
pub const TREND_LEN: usize = 5;

/// Extremum of a sampled function over the tail window, together with the
/// extrema over dyadically shrinking suffixes of that window.
///
/// `trend[k]` covers the last `span / 2^k` of the window, so `trend[0]`
/// equals `value`. The estimate counts as converged when the last two trend
/// entries agree within the margin; an oscillatory-but-bounded statistic
/// converges while a drifting one (for example along `cos(log t)`) does not.
#[derive(Debug, Clone, PartialEq)]
pub struct TailEstimate {
    pub value: f64,
    pub trend: Vec<f64>,
    pub converged: bool,
}

fn suffix_start(n_points: usize, k: u32) -> usize {
    let last = (n_points - 1) as f64;
    let idx = (last * (1.0 - 0.5f64.powi(k as i32))).ceil() as usize;
    idx.min(n_points - 1)
}

/// Tail infimum of a sample array (uniform grid assumed).
pub fn tail_inf_of(samples: &[f64], margin: f64) -> TailEstimate {
    assert!(!samples.is_empty(), "tail estimate needs samples");
    let n = samples.len();
    let starts: Vec<usize> = (0..TREND_LEN as u32).map(|k| suffix_start(n, k)).collect();
    let mut trend = vec![f64::INFINITY; TREND_LEN];
    let mut run = f64::INFINITY;
    let mut k = TREND_LEN;
    for j in (0..n).rev() {
        if samples[j] < run {
            run = samples[j];
        }
        while k > 0 && starts[k - 1] == j {
            trend[k - 1] = run;
            k -= 1;
        }
    }
    let converged = (trend[TREND_LEN - 1] - trend[TREND_LEN - 2]).abs() < margin;
    TailEstimate {
        value: trend[0],
        trend,
        converged,
    }
}

/// Tail supremum; exact dual of [`tail_inf_of`] under negation.
pub fn tail_sup_of(samples: &[f64], margin: f64) -> TailEstimate {
    let negated: Vec<f64> = samples.iter().map(|x| -x).collect();
    let est = tail_inf_of(&negated, margin);
    TailEstimate {
        value: -est.value,
        trend: est.trend.iter().map(|v| -v).collect(),
        converged: est.converged,
    }
}

/// The tail evaluation grid `[tail_start, horizon]`.
pub fn tail_grid(cfg: &AnalysisConfig) -> Vec<f64> {
    uniform_grid(cfg.tail_start, cfg.horizon, cfg.grid_step)
}

/// Evaluates `f` on the tail grid.
pub fn tail_samples<F>(cfg: &AnalysisConfig, mut f: F) -> Result<Vec<f64>, NumericError>
where
    F: FnMut(f64) -> Result<f64, NumericError>,
{
    tail_grid(cfg)
        .into_iter()
        .map(|t| sample(&mut f, t))
        .collect()
}

/// Sliding-window maxima: `out[i] = max(samples[i ..= i + window])`, so the
/// entry whose window ends at grid index `j` is `out[j - window]`.
pub fn moving_sup(samples: &[f64], window: usize) -> Vec<f64> {
    assert!(window < samples.len(), "window exceeds the sample range");
    let mut deque: VecDeque<usize> = VecDeque::new();
    let mut out = Vec::with_capacity(samples.len() - window);
    for j in 0..samples.len() {
        while deque.back().is_some_and(|&b| samples[b] <= samples[j]) {
            deque.pop_back();
        }
        deque.push_back(j);
        if *deque.front().unwrap() + window < j {
            deque.pop_front();
        }
        if j >= window {
            out.push(samples[*deque.front().unwrap()]);
        }
    }
    out
}

/// A function known only through uniform samples: linear interpolation
/// between nodes and trapezoid integrals via prefix sums. Used where the
/// integrand itself is grid-born (the moving-supremum lower bound), so
/// adaptive quadrature has nothing finer to resolve.
#[derive(Debug, Clone)]
pub(crate) struct GridFn {
    lo: f64,
    h: f64,
    values: Vec<f64>,
    prefix: Vec<f64>,
}

impl GridFn {
    pub(crate) fn new(lo: f64, h: f64, values: Vec<f64>) -> GridFn {
        assert!(values.len() >= 2 && h > 0.0);
        let mut prefix = Vec::with_capacity(values.len());
        prefix.push(0.0);
        for j in 1..values.len() {
            prefix.push(prefix[j - 1] + 0.5 * h * (values[j - 1] + values[j]));
        }
        GridFn {
            lo,
            h,
            values,
            prefix,
        }
    }

    pub(crate) fn hi(&self) -> f64 {
        self.lo + self.h * (self.values.len() - 1) as f64
    }

    fn locate(&self, t: f64) -> (usize, f64) {
        let pos = (t - self.lo) / self.h;
        let j = (pos.floor() as isize).clamp(0, self.values.len() as isize - 2) as usize;
        (j, (pos - j as f64).clamp(0.0, 1.0))
    }

    pub(crate) fn value_at(&self, t: f64) -> f64 {
        let (j, alpha) = self.locate(t);
        self.values[j] + alpha * (self.values[j + 1] - self.values[j])
    }

    /// Antiderivative of the interpolant, measured from `lo`.
    fn antiderivative(&self, t: f64) -> f64 {
        let (j, alpha) = self.locate(t);
        let dv = self.values[j + 1] - self.values[j];
        self.prefix[j] + self.h * alpha * (self.values[j] + 0.5 * alpha * dv)
    }

    pub(crate) fn integral(&self, a: f64, b: f64) -> Result<f64, NumericError> {
        if b < a {
            return Err(NumericError::InvalidInterval { a, b });
        }
        let slack = self.h * 1e-9;
        if a < self.lo - slack || b > self.hi() + slack {
            return Err(NumericError::InvalidInterval { a, b });
        }
        Ok(self.antiderivative(b) - self.antiderivative(a))
    }
}

/// Largest shifted-difference `|f(t + h) - f(t)|` observed over the final
/// trend window, maximized over the configured shifts. Shifted points past
/// the horizon are skipped; if no shift fits at all the score is infinite
/// (never slow). Small scores certify that the coefficient data is close to
/// constant at the scale of the delays, which is what the limsup-style
/// criteria need.
pub fn slow_variation_score<F>(cfg: &AnalysisConfig, mut f: F) -> Result<f64, NumericError>
where
    F: FnMut(f64) -> Result<f64, NumericError>,
{
    let span = cfg.horizon - cfg.tail_start;
    let window_start = cfg.horizon - span / 16.0;
    let grid = uniform_grid(window_start, cfg.horizon, cfg.grid_step);
    let slack = cfg.grid_step * 1e-9;
    let mut score = 0.0f64;
    let mut any = false;
    for &t in &grid {
        let base = sample(&mut f, t)?;
        for &h in &cfg.slow_shifts {
            let u = t + h;
            if u <= cfg.horizon + slack {
                let shifted = sample(&mut f, u.min(cfg.horizon))?;
                score = score.max((shifted - base).abs());
                any = true;
            }
        }
    }
    if any {
        Ok(score)
    } else {
        Ok(f64::INFINITY)
    }
}
