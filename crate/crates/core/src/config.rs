//! Run configuration: a single JSON document that fully reproduces a run.
//!
//! The document carries the equation (term lists with expression strings),
//! the analysis policy, an optional simulation section, and output paths.
//! Example:
//!
//! ```json
//! {
//!   "t0": 0.0,
//!   "neutral":  [{"coeff": "1/3", "delay": "2"}],
//!   "positive": [{"coeff": "cos(2*t)+2", "delay": "0.5"}],
//!   "negative": [{"coeff": "cos(2*t+0.5)+1.5", "delay": "0.25"}],
//!   "analysis": {"tail_start": 5.0, "horizon": 100.0, "grid_step": 0.005},
//!   "simulate": {"history": "1", "t_end": 60.0, "dt": 0.001},
//!   "output":   {"report": "report.json", "trajectory": "traj.txt"}
//! }
//! ```
//!
//! All expression strings use the grammar of [`Expr::parse`]. Optional
//! analysis knobs (`quad_tol`, `root_tol`, `margin`, `omega_slack`,
//! `m_max`, `slow_shifts`, `tau_hat`) override the defaults of
//! [`AnalysisConfig`].

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::criteria::AnalyzeOptions;
use crate::expr::{Expr, ParseError};
use crate::model::{AnalysisConfig, ProblemSpec, Term};

/// One coefficient/delay pair, both as expression strings.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermConfig {
    pub coeff: String,
    pub delay: String,
}

/// The `analysis` section. Required fields pin the tail window; the rest
/// default to [`AnalysisConfig::new`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSection {
    pub tail_start: f64,
    pub horizon: f64,
    pub grid_step: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quad_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub root_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub margin: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_slack: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m_max: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slow_shifts: Option<Vec<f64>>,
    /// Optional comparison delay for criterion C2, an expression string.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_hat: Option<String>,
}

/// The `simulate` section.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    /// Initial function on `[t0 - D, t0]`, an expression string.
    pub history: String,
    pub t_end: f64,
    pub dt: f64,
}

/// The `output` section. Paths are optional; the report goes to stdout
/// when no path is given.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trajectory: Option<String>,
    #[serde(default = "default_format")]
    pub format: String,
}

impl Default for OutputSection {
    fn default() -> OutputSection {
        OutputSection {
            report: None,
            trajectory: None,
            format: default_format(),
        }
    }
}

fn default_format() -> String {
    "json".to_owned()
}

/// The whole configuration document.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub t0: f64,
    #[serde(default)]
    pub neutral: Vec<TermConfig>,
    pub positive: Vec<TermConfig>,
    #[serde(default)]
    pub negative: Vec<TermConfig>,
    pub analysis: AnalysisSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulate: Option<SimulateSection>,
    #[serde(default)]
    pub output: OutputSection,
}

/// Configuration ingestion failure. Everything here is a user input
/// problem, as opposed to a numerical one.
#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: {detail}")]
    Json { path: String, detail: String },
    #[error("in {field} expression `{text}`: {source}")]
    Expr {
        field: String,
        text: String,
        source: ParseError,
    },
    #[error("{what}")]
    Invalid { what: String },
}

impl RunConfig {
    /// Reads and parses a configuration file.
    pub fn load(path: &Path) -> Result<RunConfig, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        RunConfig::from_json(&text, &path.display().to_string())
    }

    /// Parses a configuration from JSON text; `origin` labels errors (a
    /// path, or any other name for the source).
    pub fn from_json(text: &str, origin: &str) -> Result<RunConfig, ConfigError> {
        serde_json::from_str(text).map_err(|e| ConfigError::Json {
            path: origin.to_owned(),
            detail: e.to_string(),
        })
    }

    /// Parses the term lists into a [`ProblemSpec`]. Errors carry the field
    /// path (for example `positive[1].coeff`) and the byte offset inside
    /// the offending expression.
    pub fn problem_spec(&self) -> Result<ProblemSpec, ConfigError> {
        let parse_terms = |list: &[TermConfig], name: &str| -> Result<Vec<Term>, ConfigError> {
            list.iter()
                .enumerate()
                .map(|(i, tc)| {
                    let coeff = parse_field(&tc.coeff, &format!("{name}[{i}].coeff"))?;
                    let delay = parse_field(&tc.delay, &format!("{name}[{i}].delay"))?;
                    Ok(Term::new(coeff, delay))
                })
                .collect()
        };
        Ok(ProblemSpec {
            t0: self.t0,
            neutral: parse_terms(&self.neutral, "neutral")?,
            positive: parse_terms(&self.positive, "positive")?,
            negative: parse_terms(&self.negative, "negative")?,
        })
    }

    /// Materialises the analysis policy, applying any overrides present.
    pub fn analysis_config(&self) -> Result<AnalysisConfig, ConfigError> {
        let a = &self.analysis;
        let mut cfg = AnalysisConfig::new(a.tail_start, a.horizon, a.grid_step);
        if let Some(v) = a.quad_tol {
            cfg.quad_tol = v;
        }
        if let Some(v) = a.root_tol {
            cfg.root_tol = v;
        }
        if let Some(v) = a.margin {
            cfg.margin = v;
        }
        if let Some(v) = a.omega_slack {
            cfg.omega_slack = v;
        }
        if let Some(v) = a.m_max {
            cfg.m_max = v;
        }
        if let Some(ref v) = a.slow_shifts {
            cfg.slow_shifts = v.clone();
        }
        Ok(cfg)
    }

    /// Analyzer options: the optional `tau_hat` expression plus any
    /// slow-variation assertions supplied by the caller.
    pub fn analyze_options(&self, assert_slow: &[String]) -> Result<AnalyzeOptions, ConfigError> {
        let tau_hat = match self.analysis.tau_hat {
            Some(ref text) => Some(parse_field(text, "analysis.tau_hat")?),
            None => None,
        };
        Ok(AnalyzeOptions {
            assert_slow: assert_slow.to_vec(),
            tau_hat,
        })
    }

    /// The simulation section, or an error explaining it is missing.
    pub fn simulate_section(&self) -> Result<&SimulateSection, ConfigError> {
        self.simulate.as_ref().ok_or_else(|| ConfigError::Invalid {
            what: "config has no `simulate` section".to_owned(),
        })
    }

    /// Parses the history expression of the simulation section.
    pub fn history(&self) -> Result<Expr, ConfigError> {
        parse_field(&self.simulate_section()?.history, "simulate.history")
    }
}

fn parse_field(text: &str, field: &str) -> Result<Expr, ConfigError> {
    Expr::parse(text).map_err(|source| ConfigError::Expr {
        field: field.to_owned(),
        text: text.to_owned(),
        source,
    })
}
