//! Equation container and hypothesis validation.
//!
//! The analyzed equation is
//!
//! ```text
//! [x(t) - Σ R_i(t) x(t - r_i(t))]' + Σ P_j(t) x(t - τ_j(t)) - Σ Q_k(t) x(t - δ_k(t)) = 0
//! ```
//!
//! for `t >= t0`, with `N_q <= N_p`, all coefficients continuous and
//! nonnegative, all delays bounded by a common constant `D`, and for each
//! paired index `k <= N_q`: `δ_k(t) <= τ_k(t)` and `δ_k'(t) < 1`. Those
//! hypotheses are checked numerically on a validation grid before any
//! analysis runs; violations are reported with the term and the grid time
//! where they were observed. After validation the negative terms are padded
//! with zero coefficients and zero delays up to `N_p`, so downstream code
//! can treat the positive/negative lists as index-aligned.

use crate::expr::{DiffError, EvalError, Expr};

/// One coefficient/delay pair of the equation.
#[derive(Debug, Clone)]
pub struct Term {
    pub coeff: Expr,
    pub delay: Expr,
}

impl Term {
    pub fn new(coeff: Expr, delay: Expr) -> Term {
        Term { coeff, delay }
    }
}

/// Raw equation description, before validation.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub t0: f64,
    /// `(R_i, r_i)` pairs.
    pub neutral: Vec<Term>,
    /// `(P_j, τ_j)` pairs.
    pub positive: Vec<Term>,
    /// `(Q_k, δ_k)` pairs; at most as many as positive pairs.
    pub negative: Vec<Term>,
}

/// Numerical policy shared by the analysis operations.
#[derive(Debug, Clone)]
pub struct AnalysisConfig {
    /// Left end of the tail window where asymptotic statistics are read.
    pub tail_start: f64,
    /// Right end of the analysis domain.
    pub horizon: f64,
    /// Spacing of the evaluation grid.
    pub grid_step: f64,
    /// Absolute error budget for each quadrature.
    pub quad_tol: f64,
    /// Residual bound for the composite-delay root solve.
    pub root_tol: f64,
    /// Strictness buffer: a criterion fires only when its statistic exceeds
    /// the threshold by more than this, and tail trends count as converged
    /// only when the last two entries differ by less.
    pub margin: f64,
    /// How far below the estimated infimum of the Ω ratios the contraction
    /// factor ω is placed. Kept independent of `margin`: ω enters the
    /// criterion statistics themselves, so tying it to the verdict buffer
    /// would perturb reported values by far more than the numerics warrant.
    pub omega_slack: f64,
    /// Largest iteration depth for the constant-delay criterion sweep.
    pub m_max: usize,
    /// Shift lengths used by the slow-variation score.
    pub slow_shifts: Vec<f64>,
}

impl AnalysisConfig {
    /// Policy with default tolerances: `quad_tol = 1e-9`, `root_tol = 1e-10`,
    /// `margin = 1e-3`, `omega_slack = 1e-6`, `m_max = 6`, shifts `{1, 10}`.
    pub fn new(tail_start: f64, horizon: f64, grid_step: f64) -> AnalysisConfig {
        AnalysisConfig {
            tail_start,
            horizon,
            grid_step,
            quad_tol: 1e-9,
            root_tol: 1e-10,
            margin: 1e-3,
            omega_slack: 1e-6,
            m_max: 6,
            slow_shifts: vec![1.0, 10.0],
        }
    }

    fn validate(&self) -> Result<(), ModelError> {
        let fail = |what: &str| {
            Err(ModelError::Config {
                what: what.to_string(),
            })
        };
        if !self.tail_start.is_finite() || !self.horizon.is_finite() {
            return fail("tail_start and horizon must be finite");
        }
        if self.horizon <= self.tail_start {
            return fail("horizon must exceed tail_start");
        }
        if !(self.grid_step > 0.0) || !self.grid_step.is_finite() {
            return fail("grid_step must be positive");
        }
        if !(self.quad_tol > 0.0) || !(self.root_tol > 0.0) {
            return fail("quad_tol and root_tol must be positive");
        }
        if !(self.margin > 0.0) || !(self.omega_slack > 0.0) {
            return fail("margin and omega_slack must be positive");
        }
        if (self.horizon - self.tail_start) / self.grid_step > 2e7 {
            return fail("tail grid exceeds 2e7 points; increase grid_step");
        }
        if self.slow_shifts.is_empty() || self.slow_shifts.iter().any(|h| !(*h > 0.0)) {
            return fail("slow_shifts must be nonempty and positive");
        }
        Ok(())
    }
}

/// Validation failure. `Hypothesis` variants carry the term label (for
/// example `delta[1]`) and the grid time where the violation was observed,
/// so the report is reproducible by direct evaluation.
#[derive(Debug, Clone, thiserror::Error)]
pub enum ModelError {
    #[error("invalid configuration: {what}")]
    Config { what: String },
    #[error("invalid equation shape: {what}")]
    Shape { what: String },
    #[error("hypothesis violated: {what} for {term} at t = {t}")]
    Hypothesis { what: String, term: String, t: f64 },
    #[error("cannot evaluate {term} at t = {t}: {source}")]
    Eval {
        term: String,
        t: f64,
        source: EvalError,
    },
    #[error("delay {term} must be differentiable: {source}")]
    Differentiate { term: String, source: DiffError },
}

/// A validated equation, ready for analysis and simulation.
#[derive(Debug, Clone)]
pub struct NddeProblem {
    t0: f64,
    neutral: Vec<Term>,
    positive: Vec<Term>,
    /// Padded to the length of `positive` with zero coefficient/delay pairs.
    negative: Vec<Term>,
    tau_primes: Vec<Expr>,
    delta_primes: Vec<Expr>,
    n_q: usize,
    d: f64,
    all_delays_constant: bool,
    delta_constant: bool,
}

/// Validates `spec` on a grid over `[t0, horizon]` with `cfg.grid_step`
/// spacing and computes the delay bound `D`.
///
/// `D` is exact when every delay is constant and otherwise the grid
/// supremum rounded up to a multiple of the grid step. The configuration
/// is also checked here because `tail_start >= t0 + D` needs `D`.
pub fn build_problem(spec: &ProblemSpec, cfg: &AnalysisConfig) -> Result<NddeProblem, ModelError> {
    cfg.validate()?;
    if !spec.t0.is_finite() {
        return Err(ModelError::Config {
            what: "t0 must be finite".into(),
        });
    }
    if spec.positive.is_empty() {
        return Err(ModelError::Shape {
            what: "at least one positive term is required".into(),
        });
    }
    if spec.negative.len() > spec.positive.len() {
        return Err(ModelError::Shape {
            what: format!(
                "{} negative terms exceed {} positive terms",
                spec.negative.len(),
                spec.positive.len()
            ),
        });
    }
    if cfg.horizon <= spec.t0 {
        return Err(ModelError::Config {
            what: "horizon must exceed t0".into(),
        });
    }

    let grid = validation_grid(spec.t0, cfg.horizon, cfg.grid_step)?;

    let mut delay_sup = 0.0f64;
    let mut all_const = true;

    let mut check_group = |terms: &[Term], coeff_tag: &str, delay_tag: &str| {
        for (k, term) in terms.iter().enumerate() {
            let coeff_label = format!("{coeff_tag}[{}]", k + 1);
            let delay_label = format!("{delay_tag}[{}]", k + 1);
            if term.delay.as_constant().is_none() {
                all_const = false;
            }
            for &t in &grid {
                let c = term.coeff.eval(t).map_err(|source| ModelError::Eval {
                    term: coeff_label.clone(),
                    t,
                    source,
                })?;
                if c < 0.0 {
                    return Err(ModelError::Hypothesis {
                        what: format!("coefficient must be nonnegative (value {c})"),
                        term: coeff_label,
                        t,
                    });
                }
                let d = term.delay.eval(t).map_err(|source| ModelError::Eval {
                    term: delay_label.clone(),
                    t,
                    source,
                })?;
                if d < 0.0 {
                    return Err(ModelError::Hypothesis {
                        what: format!("delay must be nonnegative (value {d})"),
                        term: delay_label,
                        t,
                    });
                }
                delay_sup = delay_sup.max(d);
            }
        }
        Ok(())
    };
    check_group(&spec.neutral, "R", "r")?;
    check_group(&spec.positive, "P", "tau")?;
    check_group(&spec.negative, "Q", "delta")?;

    // Paired hypotheses: delta[k] <= tau[k] and delta[k]' < 1.
    let mut delta_primes_orig = Vec::with_capacity(spec.negative.len());
    for (k, neg) in spec.negative.iter().enumerate() {
        let label = format!("delta[{}]", k + 1);
        let dprime = neg
            .delay
            .differentiate()
            .map_err(|source| ModelError::Differentiate {
                term: label.clone(),
                source,
            })?;
        let tau = &spec.positive[k].delay;
        for &t in &grid {
            let dv = neg.delay.eval(t).map_err(|source| ModelError::Eval {
                term: label.clone(),
                t,
                source,
            })?;
            let tv = tau.eval(t).map_err(|source| ModelError::Eval {
                term: format!("tau[{}]", k + 1),
                t,
                source,
            })?;
            if dv > tv {
                return Err(ModelError::Hypothesis {
                    what: format!("delta must not exceed the paired tau ({dv} > {tv})"),
                    term: label,
                    t,
                });
            }
            let dp = dprime.eval(t).map_err(|source| ModelError::Eval {
                term: format!("{label}'"),
                t,
                source,
            })?;
            if dp >= 1.0 {
                return Err(ModelError::Hypothesis {
                    what: format!("delta' < 1 required (value {dp})"),
                    term: label,
                    t,
                });
            }
        }
        delta_primes_orig.push(dprime);
    }

    let d = if all_const {
        delay_sup
    } else {
        (delay_sup / cfg.grid_step).ceil() * cfg.grid_step
    };
    if cfg.tail_start < spec.t0 + d {
        return Err(ModelError::Config {
            what: format!(
                "tail_start must be at least t0 + D = {} (got {})",
                spec.t0 + d,
                cfg.tail_start
            ),
        });
    }

    let n_q = spec.negative.len();
    let mut negative = spec.negative.clone();
    for _ in n_q..spec.positive.len() {
        negative.push(Term::new(Expr::constant(0.0, 0), Expr::constant(0.0, 0)));
    }
    let mut delta_primes = delta_primes_orig;
    for _ in n_q..spec.positive.len() {
        delta_primes.push(Expr::constant(0.0, 0));
    }

    let mut tau_primes = Vec::with_capacity(spec.positive.len());
    for (j, pos) in spec.positive.iter().enumerate() {
        let tp = pos
            .delay
            .differentiate()
            .map_err(|source| ModelError::Differentiate {
                term: format!("tau[{}]", j + 1),
                source,
            })?;
        tau_primes.push(tp);
    }

    let delta_constant = spec
        .negative
        .iter()
        .all(|term| term.delay.as_constant().is_some());

    Ok(NddeProblem {
        t0: spec.t0,
        neutral: spec.neutral.clone(),
        positive: spec.positive.clone(),
        negative,
        tau_primes,
        delta_primes,
        n_q,
        d,
        all_delays_constant: all_const,
        delta_constant,
    })
}

fn validation_grid(t0: f64, horizon: f64, step: f64) -> Result<Vec<f64>, ModelError> {
    let span = horizon - t0;
    let n = (span / step).ceil() as usize;
    if n > 20_000_000 {
        return Err(ModelError::Config {
            what: "validation grid exceeds 2e7 points; increase grid_step".into(),
        });
    }
    let n = n.max(1);
    let h = span / n as f64;
    Ok((0..=n).map(|k| t0 + h * k as f64).collect())
}

impl NddeProblem {
    pub fn t0(&self) -> f64 {
        self.t0
    }

    /// Common bound for every delay on the analysis domain.
    pub fn delay_bound(&self) -> f64 {
        self.d
    }

    pub fn n_r(&self) -> usize {
        self.neutral.len()
    }

    pub fn n_p(&self) -> usize {
        self.positive.len()
    }

    /// Number of negative terms before padding.
    pub fn n_q(&self) -> usize {
        self.n_q
    }

    /// True when index `i` (0-based) is a padded zero negative term.
    pub fn is_padded(&self, i: usize) -> bool {
        i >= self.n_q
    }

    pub fn neutral(&self) -> &[Term] {
        &self.neutral
    }

    pub fn positive(&self) -> &[Term] {
        &self.positive
    }

    /// Negative terms, padded to the length of the positive list.
    pub fn negative(&self) -> &[Term] {
        &self.negative
    }

    pub fn tau_prime(&self, i: usize) -> &Expr {
        &self.tau_primes[i]
    }

    pub fn delta_prime(&self, i: usize) -> &Expr {
        &self.delta_primes[i]
    }

    /// `(all delays constant, all δ constant)`.
    pub fn delay_classification(&self) -> (bool, bool) {
        (self.all_delays_constant, self.delta_constant)
    }
}
