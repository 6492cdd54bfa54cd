//! Numerical oscillation certification for linear neutral delay
//! differential equations
//!
//! ```text
//! [x(t) - Σ R_i(t) x(t - r_i(t))]' + Σ P_j(t) x(t - τ_j(t)) - Σ Q_k(t) x(t - δ_k(t)) = 0
//! ```
//!
//! with continuous nonnegative coefficients and bounded variable delays.
//! The crate evaluates a family of sufficient integral criteria for
//! oscillation of every solution, reports each criterion's verdict as
//! `OSCILLATORY`, `INCONCLUSIVE`, or `INAPPLICABLE` with full diagnostics,
//! and cross-validates analytic verdicts with a method-of-steps simulator.
//!
//! Pipeline: [`expr`] parses coefficient expressions, [`model`] validates
//! the equation, [`kernel`] supplies the numerical primitives (composite
//! delay solve, adaptive quadrature, tail extrema, slow-variation scores),
//! [`criteria`] evaluates the criterion families, and [`simulate`]
//! integrates trajectories and extracts oscillation evidence.

// `!(x > 0.0)` guards reject NaN along with nonpositive values; `x <= 0.0`
// would silently admit NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod criteria;
pub mod expr;
pub mod kernel;
pub mod model;
pub mod report;
pub mod simulate;

pub use config::RunConfig;
pub use criteria::{analyze_all, AnalysisReport, AnalyzeOptions, CriterionReport, Verdict};
pub use expr::Expr;
pub use model::{build_problem, AnalysisConfig, NddeProblem, ProblemSpec, Term};
pub use simulate::{classify, detect_zeros, integrate_ndde, EmpiricalClass, Trajectory};
