//! Direct simulation by the method of steps.
//!
//! The integrated state is `z(t) = x(t) - Σ R_i(t) x(t - r_i(t))`, which
//! satisfies the ordinary delay equation
//!
//! ```text
//! z'(t) = -Σ P_i(t) x(t - τ_i(t)) + Σ Q_i(t) x(t - δ_i(t)),
//! ```
//!
//! advanced with classical fourth-order Runge-Kutta on a fixed step. The
//! solution itself is recovered at every node through the defining identity,
//! with past values interpolated from earlier nodes (four-point Lagrange)
//! and the prescribed history used for times at or before `t0`. Delays `δ`
//! may vanish: a mid-step value of `x` is then estimated from the stage
//! slope plus the neutral reconstruction, which keeps the step explicit.
//! Neutral delays must stay at least four steps long so that lookbacks
//! always land on completed nodes.
//!
//! A trajectory is evidence, never a verdict: [`classify`] reports what the
//! samples look like and nothing more.

use crate::expr::Expr;
use crate::kernel::{self, NumericError};
use crate::model::NddeProblem;

/// Trajectories are aborted once `|x|` exceeds this.
pub const BLOWUP_LIMIT: f64 = 1e12;

/// A computed solution on a uniform grid.
#[derive(Debug, Clone)]
pub struct Trajectory {
    /// Node times `t0 + j·h`.
    pub t: Vec<f64>,
    /// Solution values at the nodes.
    pub x: Vec<f64>,
    /// The integrated combination `x(t) - Σ R_i(t) x(t - r_i(t))`.
    pub z: Vec<f64>,
    /// Refined zero-crossing times of `x`, as produced by [`detect_zeros`].
    pub zeros: Vec<f64>,
    history: Expr,
    t0: f64,
    h: f64,
}

impl Trajectory {
    /// The actual step used (the requested one, shrunk so the grid lands
    /// exactly on the final time).
    pub fn step(&self) -> f64 {
        self.h
    }

    /// Solution value at an arbitrary time within the computed range:
    /// history for `u <= t0`, node interpolation afterwards.
    pub fn x_at(&self, u: f64) -> Result<f64, NumericError> {
        x_lookup(&self.history, self.t0, self.h, &self.x, u)
    }
}

/// History expression for `u <= t0`, four-point Lagrange interpolation on
/// the completed nodes otherwise. The stencil is clamped at both ends, so
/// early lookups shortly after `t0` use whatever nodes exist.
fn x_lookup(history: &Expr, t0: f64, h: f64, xs: &[f64], u: f64) -> Result<f64, NumericError> {
    if u <= t0 {
        return Ok(history.eval(u)?);
    }
    let n = xs.len();
    let pos = (u - t0) / h;
    if !pos.is_finite() || pos > (n - 1) as f64 + 1e-6 {
        return Err(NumericError::NonFinite { t: u });
    }
    let count = n.min(4);
    let base = (pos.floor() as isize - 1).clamp(0, (n - count) as isize) as usize;
    let mut acc = 0.0;
    for a in 0..count {
        let ta = (base + a) as f64;
        let mut w = xs[base + a];
        for b in 0..count {
            if b != a {
                let tb = (base + b) as f64;
                w *= (pos - tb) / (ta - tb);
            }
        }
        acc += w;
    }
    Ok(acc)
}

/// Right side of the `z` equation at stage time `u`. Delayed arguments at
/// or before the frontier node go through [`x_lookup`]; later ones (short
/// delays) are estimated from the stage slope plus the neutral terms.
#[allow(clippy::too_many_arguments)]
fn rhs(
    p: &NddeProblem,
    history: &Expr,
    t0: f64,
    h: f64,
    xs: &[f64],
    u: f64,
    t_node: f64,
    z_node: f64,
    slope: f64,
) -> Result<f64, NumericError> {
    let x_of = |v: f64| -> Result<f64, NumericError> {
        if v <= t_node + h * 1e-9 {
            x_lookup(history, t0, h, xs, v)
        } else {
            let mut val = z_node + (v - t_node) * slope;
            for term in p.neutral() {
                let r = term.delay.eval(v)?;
                val += term.coeff.eval(v)? * x_lookup(history, t0, h, xs, v - r)?;
            }
            Ok(val)
        }
    };
    let mut acc = 0.0;
    for term in p.positive() {
        let tau = term.delay.eval(u)?;
        acc -= term.coeff.eval(u)? * x_of(u - tau)?;
    }
    for i in 0..p.n_q() {
        let term = &p.negative()[i];
        let delta = term.delay.eval(u)?;
        acc += term.coeff.eval(u)? * x_of(u - delta)?;
    }
    Ok(acc)
}

/// Integrates the equation from `t0` to `t_end` with step `dt`, starting
/// from the history `x(t) = φ(t)` for `t <= t0`.
///
/// When neutral terms are present, every `r_i` is sampled along the grid
/// and the step must not exceed a quarter of the smallest value; otherwise
/// mid-step lookbacks would leave the computed range.
pub fn integrate_ndde(
    p: &NddeProblem,
    history: &Expr,
    t_end: f64,
    dt: f64,
) -> Result<Trajectory, NumericError> {
    let t0 = p.t0();
    if !(dt > 0.0) || !dt.is_finite() || !t_end.is_finite() || t_end <= t0 {
        return Err(NumericError::InvalidInterval { a: t0, b: t_end });
    }
    let span = t_end - t0;
    let n_steps = (span / dt).ceil().max(1.0) as usize;
    let h = span / n_steps as f64;

    if p.n_r() > 0 {
        let mut r_min = f64::INFINITY;
        for j in 0..=n_steps {
            let tj = t0 + j as f64 * h;
            for term in p.neutral() {
                let r = term.delay.eval(tj)?;
                if r < r_min {
                    r_min = r;
                }
            }
        }
        if !(r_min > 0.0) || h > r_min / 4.0 + 1e-15 {
            return Err(NumericError::StepTooLarge {
                dt: h,
                limit: (r_min / 4.0).max(0.0),
            });
        }
    }

    let mut ts = Vec::with_capacity(n_steps + 1);
    let mut xs = Vec::with_capacity(n_steps + 1);
    let mut zs = Vec::with_capacity(n_steps + 1);

    let x0 = history.eval(t0)?;
    let mut z0 = x0;
    for term in p.neutral() {
        let r = term.delay.eval(t0)?;
        z0 -= term.coeff.eval(t0)? * history.eval(t0 - r)?;
    }
    ts.push(t0);
    xs.push(x0);
    zs.push(z0);

    for j in 0..n_steps {
        let t_node = t0 + j as f64 * h;
        let z_node = zs[j];
        let k1 = rhs(p, history, t0, h, &xs, t_node, t_node, z_node, 0.0)?;
        let k2 = rhs(p, history, t0, h, &xs, t_node + 0.5 * h, t_node, z_node, k1)?;
        let k3 = rhs(p, history, t0, h, &xs, t_node + 0.5 * h, t_node, z_node, k2)?;
        let k4 = rhs(p, history, t0, h, &xs, t_node + h, t_node, z_node, k3)?;
        let z_next = z_node + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        let t_next = t0 + (j + 1) as f64 * h;
        let mut x_next = z_next;
        for term in p.neutral() {
            let r = term.delay.eval(t_next)?;
            x_next += term.coeff.eval(t_next)? * x_lookup(history, t0, h, &xs, t_next - r)?;
        }
        if !x_next.is_finite() {
            return Err(NumericError::NonFinite { t: t_next });
        }
        if x_next.abs() > BLOWUP_LIMIT {
            return Err(NumericError::Blowup { t: t_next });
        }
        ts.push(t_next);
        xs.push(x_next);
        zs.push(z_next);
    }

    let zeros = zeros_of(&ts, &xs);
    Ok(Trajectory {
        t: ts,
        x: xs,
        z: zs,
        zeros,
        history: history.clone(),
        t0,
        h,
    })
}

/// Zero locations of the sampled solution: a node that is exactly zero is
/// recorded once, and a sign change between neighbours is resolved by
/// linear interpolation. Negating the whole trajectory leaves the result
/// bitwise unchanged.
pub fn detect_zeros(traj: &Trajectory) -> Vec<f64> {
    zeros_of(&traj.t, &traj.x)
}

fn zeros_of(ts: &[f64], xs: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let mut zeros = Vec::new();
    for j in 0..n.saturating_sub(1) {
        let a = xs[j];
        let b = xs[j + 1];
        if a == 0.0 {
            zeros.push(ts[j]);
        } else if a * b < 0.0 {
            zeros.push(ts[j] + (ts[j + 1] - ts[j]) * a / (a - b));
        }
    }
    if let (Some(&tl), Some(&xl)) = (ts.last(), xs.last()) {
        if xl == 0.0 {
            zeros.push(tl);
        }
    }
    zeros
}

/// What a finite trajectory sample looks like. Never a proof.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmpiricalClass {
    /// At least two sign changes in the final window.
    Oscillating,
    /// No sign change and bounded away from zero in the final window.
    Nonoscillating,
    Undecided,
}

impl EmpiricalClass {
    pub fn as_str(self) -> &'static str {
        match self {
            EmpiricalClass::Oscillating => "EMPIRICALLY_OSCILLATING",
            EmpiricalClass::Nonoscillating => "EMPIRICALLY_NONOSCILLATING",
            EmpiricalClass::Undecided => "UNDECIDED",
        }
    }
}

/// Classifies the last `window` time units of the trajectory.
pub fn classify(traj: &Trajectory, window: f64) -> EmpiricalClass {
    let t_end = match traj.t.last() {
        Some(&v) => v,
        None => return EmpiricalClass::Undecided,
    };
    let cut = t_end - window;
    let mut changes = 0usize;
    let mut last_sign = 0i8;
    let mut min_abs = f64::INFINITY;
    for (j, &tj) in traj.t.iter().enumerate() {
        if tj < cut {
            continue;
        }
        let v = traj.x[j];
        min_abs = min_abs.min(v.abs());
        let s = if v > 0.0 {
            1i8
        } else if v < 0.0 {
            -1i8
        } else {
            0i8
        };
        if s != 0 {
            if last_sign != 0 && s != last_sign {
                changes += 1;
            }
            last_sign = s;
        }
    }
    if changes >= 2 {
        EmpiricalClass::Oscillating
    } else if changes == 0 && min_abs > 0.0 {
        EmpiricalClass::Nonoscillating
    } else {
        EmpiricalClass::Undecided
    }
}

/// Node values of the comparison function
///
/// ```text
/// y(t) = x(t) - Σ R_i(t) x(t - r_i(t))
///             - Σ Q_i-integrals over [t - c_i(t), t] of Q_i(s) x(s - δ_i(s)),
/// ```
///
/// for nodes with `t >= t0 + D`. When the transformed coefficients are
/// nonnegative and the combined neutral mass stays at most one, `y` must be
/// positive and nonincreasing along any eventually positive solution, so
/// this is a cheap structural check on a computed trajectory. Integrals use
/// the trapezoid rule at the trajectory's own resolution, which matches the
/// interpolation error already present in `x`.
pub fn y_transform(
    p: &NddeProblem,
    traj: &Trajectory,
    root_tol: f64,
) -> Result<Vec<(f64, f64)>, NumericError> {
    let d = p.delay_bound();
    let mut out = Vec::new();
    for (j, &tj) in traj.t.iter().enumerate() {
        if tj < p.t0() + d - 1e-12 {
            continue;
        }
        let mut y = traj.x[j];
        for term in p.neutral() {
            y -= term.coeff.eval(tj)? * traj.x_at(tj - term.delay.eval(tj)?)?;
        }
        for i in 0..p.n_q() {
            let c = kernel::solve_composite(p, i, tj, root_tol)?;
            if c == 0.0 {
                continue;
            }
            let a = tj - c;
            let k = ((c / traj.h).ceil() as usize).max(1);
            let hh = c / k as f64;
            let term = &p.negative()[i];
            let g = |s: f64| -> Result<f64, NumericError> {
                Ok(term.coeff.eval(s)? * traj.x_at(s - term.delay.eval(s)?)?)
            };
            let mut acc = 0.5 * (g(a)? + g(tj)?);
            for kk in 1..k {
                acc += g(a + kk as f64 * hh)?;
            }
            y -= acc * hh;
        }
        out.push((tj, y));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_problem, AnalysisConfig, ProblemSpec, Term};

    fn term(coeff: &str, delay: &str) -> Term {
        Term::new(Expr::parse(coeff).unwrap(), Expr::parse(delay).unwrap())
    }

    fn sin_problem() -> NddeProblem {
        let spec = ProblemSpec {
            t0: 0.0,
            neutral: vec![],
            positive: vec![term("1", "pi/2")],
            negative: vec![],
        };
        build_problem(&spec, &AnalysisConfig::new(2.0, 20.0, 0.01)).unwrap()
    }

    #[test]
    fn pure_delay_tracks_the_sine_solution() {
        let p = sin_problem();
        let history = Expr::parse("sin(t)").unwrap();
        let traj = integrate_ndde(&p, &history, 12.0, 1e-3).unwrap();
        let mut worst = 0.0f64;
        for (j, &tj) in traj.t.iter().enumerate() {
            worst = worst.max((traj.x[j] - tj.sin()).abs());
        }
        assert!(worst < 1e-8, "max error {worst}");

        // sin(0) = 0 exactly, so the initial node counts too.
        let zeros = detect_zeros(&traj);
        assert_eq!(zeros, traj.zeros);
        assert_eq!(zeros.len(), 4, "zeros: {zeros:?}");
        for (k, &z) in zeros.iter().enumerate() {
            let want = k as f64 * std::f64::consts::PI;
            assert!((z - want).abs() < 1e-6, "zero {k} at {z}");
        }
        assert_eq!(classify(&traj, 12.0), EmpiricalClass::Oscillating);
    }

    #[test]
    fn rk4_error_shrinks_sixteenfold_per_halving() {
        let p = sin_problem();
        let history = Expr::parse("sin(t)").unwrap();
        // Keep the step commensurate with the delay (and the span a
        // power-of-two multiple of the step) so the interpolation phase is
        // identical in both runs and the ratio measures the order alone.
        let dt = std::f64::consts::PI / 64.0;
        let t_end = 128.0 * dt;
        let err = |dt: f64| {
            let traj = integrate_ndde(&p, &history, t_end, dt).unwrap();
            traj.t
                .iter()
                .zip(&traj.x)
                .map(|(&tj, &xj)| (xj - tj.sin()).abs())
                .fold(0.0f64, f64::max)
        };
        let ratio = err(dt) / err(dt / 2.0);
        assert!(
            (12.0..20.0).contains(&ratio),
            "order ratio {ratio} not in the fourth-order band"
        );
    }

    #[test]
    fn decaying_solution_stays_nonoscillating() {
        let spec = ProblemSpec {
            t0: 0.0,
            neutral: vec![],
            positive: vec![term("0.5*exp(-0.5)", "1")],
            negative: vec![],
        };
        let p = build_problem(&spec, &AnalysisConfig::new(2.0, 20.0, 0.01)).unwrap();
        let history = Expr::parse("exp(-t/2)").unwrap();
        let traj = integrate_ndde(&p, &history, 15.0, 1e-3).unwrap();
        let mut worst = 0.0f64;
        for (j, &tj) in traj.t.iter().enumerate() {
            worst = worst.max((traj.x[j] - (-tj / 2.0).exp()).abs());
        }
        assert!(worst < 1e-8, "max error {worst}");
        assert!(detect_zeros(&traj).is_empty());
        assert_eq!(classify(&traj, 5.0), EmpiricalClass::Nonoscillating);
    }

    fn neutral_spec() -> ProblemSpec {
        ProblemSpec {
            t0: 0.0,
            neutral: vec![term("0.2", "log(2)")],
            positive: vec![term("0.4", "log(2)")],
            negative: vec![term("0.2", "0")],
        }
    }

    #[test]
    fn neutral_equation_with_vanishing_delta() {
        let p = build_problem(&neutral_spec(), &AnalysisConfig::new(2.0, 20.0, 0.01)).unwrap();
        let history = Expr::parse("exp(-t)").unwrap();
        let traj = integrate_ndde(&p, &history, 10.0, 1e-3).unwrap();

        let mut worst = 0.0f64;
        for (j, &tj) in traj.t.iter().enumerate() {
            worst = worst.max((traj.x[j] - (-tj).exp()).abs());
        }
        assert!(worst < 5e-6, "max error {worst}");

        // The defining identity holds exactly at every node: recomputing the
        // neutral sum reproduces x - z bit for bit.
        let r = std::f64::consts::LN_2;
        for (j, &tj) in traj.t.iter().enumerate() {
            let back = traj.x_at(tj - r).unwrap();
            let diff = (traj.x[j] - traj.z[j] - 0.2 * back).abs();
            assert!(
                diff <= 4.0 * f64::EPSILON * traj.x[j].abs().max(1.0),
                "node {j}: {diff}"
            );
        }

        // Comparison function: y(t) = 0.4 e^{-t}, positive and nonincreasing.
        let ys = y_transform(&p, &traj, 1e-10).unwrap();
        assert!(!ys.is_empty());
        let mut prev = f64::INFINITY;
        for &(tj, yj) in &ys {
            let want = 0.4 * (-tj).exp();
            assert!((yj - want).abs() < 1e-5, "y({tj}) = {yj}, want {want}");
            assert!(yj > 0.0);
            assert!(yj <= prev + 1e-12, "y not nonincreasing at {tj}");
            prev = yj;
        }
    }

    #[test]
    fn neutral_delay_bounds_the_step() {
        let spec = ProblemSpec {
            t0: 0.0,
            neutral: vec![term("0.2", "0.01")],
            positive: vec![term("0.4", "1")],
            negative: vec![],
        };
        let p = build_problem(&spec, &AnalysisConfig::new(2.0, 20.0, 0.001)).unwrap();
        let history = Expr::parse("1").unwrap();
        let err = integrate_ndde(&p, &history, 5.0, 0.005).unwrap_err();
        match err {
            NumericError::StepTooLarge { limit, .. } => {
                assert!((limit - 0.0025).abs() < 1e-12)
            }
            other => panic!("unexpected error {other}"),
        }
        assert!(integrate_ndde(&p, &history, 5.0, 0.002).is_ok());
    }

    #[test]
    fn runaway_growth_reports_blowup() {
        let spec = ProblemSpec {
            t0: 0.0,
            neutral: vec![],
            positive: vec![term("0.1", "1")],
            negative: vec![term("3", "0")],
        };
        let p = build_problem(&spec, &AnalysisConfig::new(2.0, 20.0, 0.01)).unwrap();
        let history = Expr::parse("1").unwrap();
        let err = integrate_ndde(&p, &history, 30.0, 1e-3).unwrap_err();
        assert!(matches!(err, NumericError::Blowup { .. }), "{err}");
    }

    #[test]
    fn zero_detection_is_sign_symmetric_and_counts_touches_once() {
        let p = sin_problem();
        let up = integrate_ndde(&p, &Expr::parse("sin(t)").unwrap(), 12.0, 1e-2).unwrap();
        let down = integrate_ndde(&p, &Expr::parse("-sin(t)").unwrap(), 12.0, 1e-2).unwrap();
        let zu = detect_zeros(&up);
        let zd = detect_zeros(&down);
        assert_eq!(zu.len(), zd.len());
        for (a, b) in zu.iter().zip(&zd) {
            assert_eq!(a.to_bits(), b.to_bits());
        }

        let touch = Trajectory {
            t: vec![0.0, 1.0, 2.0, 3.0],
            x: vec![1.0, 0.0, -1.0, 1.0],
            z: vec![1.0, 0.0, -1.0, 1.0],
            zeros: vec![],
            history: Expr::parse("1").unwrap(),
            t0: 0.0,
            h: 1.0,
        };
        assert_eq!(detect_zeros(&touch), vec![1.0, 2.5]);
    }
}
