//! Checkers shared by the property suite and the acceptance gate. Each
//! takes plain parameters, builds the objects through the public API, and
//! panics with context on any violation.

use ndde_osc::criteria::{self, AnalyzeOptions, Verdict};
use ndde_osc::kernel::{self, NumericError};
use ndde_osc::model::{build_problem, AnalysisConfig, NddeProblem, ProblemSpec, Term};
use ndde_osc::Expr;

pub fn term(coeff: &str, delay: &str) -> Term {
    Term::new(Expr::parse(coeff).unwrap(), Expr::parse(delay).unwrap())
}

/// Parameters for a composite-delay instance: `τ(t) = a + b sin(w t)`,
/// `δ(t) = q (a − b)/2 · (1 + e sin(ν t))`. The ranges documented on each
/// field keep the pair admissible (`0 ≤ δ ≤ τ`, `δ' < 1`, `τ' < 1`).
#[derive(Debug, Clone)]
pub struct CompositeCase {
    /// Base positive delay, in `[0.5, 2]`.
    pub a: f64,
    /// Modulation amplitude, in `[0, min(a/2, 0.9/w)]`.
    pub b: f64,
    /// Modulation frequency, in `[0.1, 2]`.
    pub w: f64,
    /// Fraction of the gap used by δ, in `[0, 1]`.
    pub q: f64,
    /// Relative modulation of δ, in `[0, 0.5]`.
    pub e: f64,
    /// Frequency of the δ modulation, in `[0.1, 1]`.
    pub nu: f64,
    /// Sample time, in `[tail_start, horizon - 1]`.
    pub t: f64,
}

impl CompositeCase {
    pub fn build(&self) -> NddeProblem {
        let tau = format!("{} + {}*sin({}*t)", self.a, self.b, self.w);
        let delta = format!(
            "{}*(1 + {}*sin({}*t))",
            self.q * (self.a - self.b) / 2.0,
            self.e,
            self.nu
        );
        let spec = ProblemSpec {
            t0: 0.0,
            neutral: vec![],
            positive: vec![term("1", &tau)],
            negative: vec![Term::new(
                Expr::parse("0.1").unwrap(),
                Expr::parse(&delta).unwrap(),
            )],
        };
        build_problem(&spec, &case_config()).unwrap()
    }
}

pub fn case_config() -> AnalysisConfig {
    let mut cfg = AnalysisConfig::new(5.0, 30.0, 0.05);
    cfg.m_max = 2;
    cfg
}

/// Residual and interval bounds for the composite-delay solve, plus the
/// derivative identity against a central finite difference.
pub fn check_composite(case: &CompositeCase) {
    let p = case.build();
    let cfg = case_config();
    let t = case.t;
    let c = kernel::solve_composite(&p, 0, t, cfg.root_tol).unwrap();
    let tau = p.positive()[0].delay.eval(t).unwrap();
    let delta = p.negative()[0].delay.eval(t - c).unwrap();
    let residual = (c - tau + delta).abs();
    assert!(
        residual <= cfg.root_tol * (1.0 + tau.abs()),
        "residual {residual} for {case:?}"
    );
    assert!(
        (0.0..=p.delay_bound() + cfg.root_tol).contains(&c),
        "c = {c} outside [0, D] for {case:?}"
    );

    let (_, rate) = kernel::composite_at(&p, 0, t, cfg.root_tol).unwrap();
    let h = 1e-5;
    let cp = kernel::solve_composite(&p, 0, t + h, cfg.root_tol).unwrap();
    let cm = kernel::solve_composite(&p, 0, t - h, cfg.root_tol).unwrap();
    let fd = (cp - cm) / (2.0 * h);
    let analytic = 1.0 - rate;
    assert!(
        (analytic - fd).abs() <= 1e-5 * (1.0 + analytic.abs()),
        "c' mismatch: analytic {analytic}, fd {fd} for {case:?}"
    );
}

/// Quadrature oracle: `a sin(b t) + c t² + d` against its antiderivative.
#[derive(Debug, Clone)]
pub struct QuadCase {
    pub a: f64,
    /// In `[0.2, 4]` to keep the frequency sane.
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub lo: f64,
    /// Interval width, in `(0, 20]`.
    pub width: f64,
}

pub fn check_quadrature(case: &QuadCase) {
    let &QuadCase {
        a,
        b,
        c,
        d,
        lo,
        width,
    } = case;
    let hi = lo + width;
    let f = |t: f64| -> Result<f64, NumericError> { Ok(a * (b * t).sin() + c * t * t + d) };
    let exact = |t: f64| -a / b * (b * t).cos() + c * t * t * t / 3.0 + d * t;
    let got = kernel::integrate(f, lo, hi, 1e-10).unwrap();
    let want = exact(hi) - exact(lo);
    let scale = 1.0 + want.abs();
    assert!(
        (got - want).abs() <= 1e-8 * scale,
        "quadrature off by {} for {case:?}",
        (got - want).abs()
    );
}

/// `tail_inf(-f) = -tail_sup(f)`, bitwise, including the trend.
pub fn check_tail_duality(samples: &[f64], margin: f64) {
    let neg: Vec<f64> = samples.iter().map(|&v| -v).collect();
    let inf = kernel::tail_inf_of(&neg, margin);
    let sup = kernel::tail_sup_of(samples, margin);
    assert_eq!(inf.value.to_bits(), (-sup.value).to_bits());
    assert_eq!(inf.trend.len(), sup.trend.len());
    for (x, y) in inf.trend.iter().zip(&sup.trend) {
        assert_eq!(x.to_bits(), (-y).to_bits());
    }
    assert_eq!(inf.converged, sup.converged);
    for &v in samples {
        assert!(sup.value >= v);
    }
}

/// A small constant-delay neutral problem used by the scale-invariance and
/// verdict-semantics suites. All parameter ranges keep it buildable.
#[derive(Debug, Clone)]
pub struct ProblemCase {
    /// Neutral coefficient, in `[0, 0.45]`.
    pub r_coeff: f64,
    /// Neutral delay, in `[0.5, 2]`.
    pub r_delay: f64,
    /// Base positive coefficient, in `[0.2, 2.5]`.
    pub p_base: f64,
    /// Relative modulation, in `[0, 0.8]`.
    pub p_mod: f64,
    /// Modulation frequency, in `[0.2, 3]`.
    pub p_freq: f64,
    /// Positive delay, in `[0.2, 1.5]`.
    pub tau: f64,
    /// Negative coefficient as a fraction of `p_base`, in `[0, 1.2]`.
    pub q_frac: f64,
    /// Negative delay as a fraction of `tau`, in `[0, 1]`.
    pub delta_frac: f64,
}

impl ProblemCase {
    pub fn spec(&self, scale: f64) -> ProblemSpec {
        let p = format!(
            "{}*(1 + {}*sin({}*t))",
            self.p_base * scale,
            self.p_mod,
            self.p_freq
        );
        let q = format!("{}", self.p_base * self.q_frac * scale);
        ProblemSpec {
            t0: 0.0,
            neutral: vec![term(
                &format!("{}", self.r_coeff),
                &format!("{}", self.r_delay),
            )],
            positive: vec![term(&p, &format!("{}", self.tau))],
            negative: vec![term(&q, &format!("{}", self.tau * self.delta_frac))],
        }
    }

    pub fn analyze(&self, scale: f64) -> ndde_osc::AnalysisReport {
        let cfg = case_config();
        let problem = build_problem(&self.spec(scale), &cfg).unwrap();
        criteria::analyze_all(&problem, &cfg, &AnalyzeOptions::default())
    }
}

/// Scaling every coefficient that enters the Ω quotients by a power of two
/// leaves ω bitwise unchanged (the scale cancels exactly).
pub fn check_omega_scale(case: &ProblemCase, k: i32) {
    let base = case.analyze(1.0);
    let scaled = case.analyze(2f64.powi(k));
    match (base.omega, scaled.omega) {
        (None, None) => {}
        (Some(a), Some(b)) => assert_eq!(
            a.to_bits(),
            b.to_bits(),
            "omega changed under 2^{k} scaling for {case:?}"
        ),
        (a, b) => panic!("omega availability changed under scaling: {a:?} vs {b:?} for {case:?}"),
    }
}

/// Structural verdict semantics, checked on every criterion row of a
/// report: OSCILLATORY requires all preconditions passed, a statistic
/// strictly above threshold + margin, and a converged tail; INAPPLICABLE
/// requires a failed precondition; INCONCLUSIVE requires passing
/// preconditions.
pub fn check_verdict_semantics(rep: &ndde_osc::AnalysisReport) {
    let mut any_osc = false;
    let mut any_inc = false;
    for c in &rep.criteria {
        let all_pre = c.preconditions.iter().all(|p| p.pass);
        match c.verdict {
            Verdict::Oscillatory => {
                any_osc = true;
                assert!(all_pre, "{}: oscillatory with failed precondition", c.id);
                let stat = c.statistic.expect("oscillatory without statistic");
                assert!(
                    stat > c.threshold + c.margin,
                    "{}: stat {stat} not above {} + {}",
                    c.id,
                    c.threshold,
                    c.margin
                );
                if let Some(tail) = &c.tail {
                    assert!(tail.converged, "{}: oscillatory without convergence", c.id);
                }
            }
            Verdict::Inapplicable => {
                assert!(
                    !all_pre,
                    "{}: inapplicable but every precondition passed",
                    c.id
                );
            }
            Verdict::Inconclusive => {
                any_inc = true;
                assert!(all_pre, "{}: inconclusive with failed precondition", c.id);
            }
        }
    }
    let expected = if any_osc {
        Verdict::Oscillatory
    } else if any_inc {
        Verdict::Inconclusive
    } else {
        Verdict::Inapplicable
    };
    assert_eq!(rep.overall, expected, "overall verdict aggregation");
}
