//! Deterministic report and trajectory rendering.
//!
//! Reports are JSON with a fixed key order and every float printed with
//! twelve significant digits, so identical inputs produce byte-identical
//! documents. The writer is hand-rolled: a generic serializer would either
//! re-shorten the floats or reorder keys, and both would break the
//! determinism contract.

use std::fmt::Write as _;

use crate::criteria::{AnalysisReport, CriterionReport, Precondition};
use crate::kernel::TailEstimate;
use crate::simulate::{EmpiricalClass, Trajectory};

/// Schema tag embedded in every report document.
pub const REPORT_SCHEMA: &str = "ndde-osc-report/1";

/// Formats `x` with the given number of significant digits, then prints
/// the shortest decimal that round-trips the rounded value. `0.375` stays
/// `0.375`; a third stays `0.333333333333`.
pub fn fmt_sig(x: f64, digits: u32) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let mag = x.abs().log10().floor() as i32;
    let scale = digits as i32 - 1 - mag;
    let factor = 10f64.powi(scale);
    let rounded = (x * factor).round() / factor;
    format!("{rounded}")
}

/// Simulation evidence attached to a combined report. Evidence only: the
/// criteria quantify over every solution, while a trajectory shows one.
#[derive(Debug, Clone)]
pub struct SimEvidence {
    pub classification: EmpiricalClass,
    pub zero_count: usize,
    /// Last few refined zero times, oldest first.
    pub last_zeros: Vec<f64>,
    pub window: f64,
    pub t_end: f64,
    pub dt: f64,
}

impl SimEvidence {
    /// Summarises a trajectory, keeping at most `keep` trailing zeros.
    pub fn from_trajectory(traj: &Trajectory, window: f64, keep: usize) -> SimEvidence {
        let zeros = &traj.zeros;
        let tail = zeros[zeros.len().saturating_sub(keep)..].to_vec();
        SimEvidence {
            classification: crate::simulate::classify(traj, window),
            zero_count: zeros.len(),
            last_zeros: tail,
            window,
            t_end: *traj.t.last().unwrap_or(&f64::NAN),
            dt: traj.step(),
        }
    }
}

struct Doc {
    buf: String,
    indent: usize,
}

impl Doc {
    fn new() -> Doc {
        Doc {
            buf: String::with_capacity(16 * 1024),
            indent: 0,
        }
    }

    fn line(&mut self, s: &str) {
        for _ in 0..self.indent {
            self.buf.push_str("  ");
        }
        self.buf.push_str(s);
        self.buf.push('\n');
    }

    fn open(&mut self, s: &str) {
        self.line(s);
        self.indent += 1;
    }

    fn close(&mut self, s: &str) {
        self.indent -= 1;
        self.line(s);
    }
}

fn esc(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c if (c as u32) < 0x20 => {
                let _ = write!(out, "\\u{:04x}", c as u32);
            }
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

fn num(x: f64) -> String {
    if x.is_finite() {
        fmt_sig(x, 12)
    } else {
        "null".to_owned()
    }
}

fn opt_num(x: Option<f64>) -> String {
    match x {
        Some(v) => num(v),
        None => "null".to_owned(),
    }
}

fn comma(last: bool) -> &'static str {
    if last {
        ""
    } else {
        ","
    }
}

fn write_precondition(doc: &mut Doc, p: &Precondition, last: bool) {
    doc.line(&format!(
        "{{\"name\": {}, \"pass\": {}, \"detail\": {}}}{}",
        esc(&p.name),
        p.pass,
        esc(&p.detail),
        comma(last)
    ));
}

fn write_tail(doc: &mut Doc, label: &str, tail: &Option<TailEstimate>, last: bool) {
    match tail {
        None => doc.line(&format!("\"{label}\": null{}", comma(last))),
        Some(est) => {
            let trend: Vec<String> = est.trend.iter().map(|&v| num(v)).collect();
            doc.line(&format!(
                "\"{label}\": {{\"value\": {}, \"trend\": [{}], \"converged\": {}}}{}",
                num(est.value),
                trend.join(", "),
                est.converged,
                comma(last)
            ));
        }
    }
}

fn write_criterion(doc: &mut Doc, c: &CriterionReport, last: bool) {
    doc.open("{");
    doc.line(&format!("\"id\": {},", esc(&c.id)));
    doc.line(&format!(
        "\"m\": {},",
        c.m.map_or("null".to_owned(), |m| m.to_string())
    ));
    doc.line(&format!("\"statistic\": {},", opt_num(c.statistic)));
    doc.line(&format!("\"threshold\": {},", num(c.threshold)));
    doc.line(&format!("\"margin\": {},", num(c.margin)));
    doc.line(&format!("\"verdict\": {},", esc(c.verdict.as_str())));
    if c.preconditions.is_empty() {
        doc.line("\"preconditions\": [],");
    } else {
        doc.open("\"preconditions\": [");
        for (i, p) in c.preconditions.iter().enumerate() {
            write_precondition(doc, p, i + 1 == c.preconditions.len());
        }
        doc.close("],");
    }
    doc.open("\"diagnostics\": {");
    write_tail(doc, "tail", &c.tail, false);
    doc.line(&format!("\"slow_score\": {},", opt_num(c.slow_score)));
    let notes: Vec<String> = c.notes.iter().map(|n| esc(n)).collect();
    doc.line(&format!("\"notes\": [{}]", notes.join(", ")));
    doc.close("}");
    doc.close(&format!("}}{}", comma(last)));
}

fn write_simulation(doc: &mut Doc, sim: Option<&SimEvidence>, last: bool) {
    match sim {
        None => doc.line(&format!("\"simulation\": null{}", comma(last))),
        Some(ev) => {
            doc.open("\"simulation\": {");
            doc.line(&format!(
                "\"classification\": {},",
                esc(ev.classification.as_str())
            ));
            doc.line(&format!("\"zero_count\": {},", ev.zero_count));
            let zs: Vec<String> = ev.last_zeros.iter().map(|&z| num(z)).collect();
            doc.line(&format!("\"last_zeros\": [{}],", zs.join(", ")));
            doc.line(&format!("\"window\": {},", num(ev.window)));
            doc.line(&format!("\"t_end\": {},", num(ev.t_end)));
            doc.line(&format!("\"dt\": {},", num(ev.dt)));
            doc.line(&format!(
                "\"note\": {}",
                esc(
                    "trajectory evidence only: criteria quantify over all solutions, \
                     a simulation shows one history"
                )
            ));
            doc.close(&format!("}}{}", comma(last)));
        }
    }
}

/// Renders the full report document. Byte-identical for identical inputs.
pub fn render_report(rep: &AnalysisReport, sim: Option<&SimEvidence>) -> String {
    let mut doc = Doc::new();
    doc.open("{");
    doc.line(&format!("\"schema\": {},", esc(REPORT_SCHEMA)));
    doc.line(&format!("\"overall\": {},", esc(rep.overall.as_str())));
    doc.line(&format!("\"margin\": {},", num(rep.margin)));
    doc.line(&format!("\"delay_bound\": {},", num(rep.delay_bound)));
    doc.line(&format!(
        "\"all_delays_constant\": {},",
        rep.all_delays_constant
    ));
    doc.line(&format!("\"delta_constant\": {},", rep.delta_constant));
    doc.line(&format!(
        "\"transform\": {{\"mode\": {}, \"detail\": {}}},",
        esc(&rep.transform_mode),
        esc(&rep.transform_detail)
    ));
    doc.line(&format!(
        "\"h1\": {{\"name\": {}, \"pass\": {}, \"detail\": {}}},",
        esc(&rep.h1.name),
        rep.h1.pass,
        esc(&rep.h1.detail)
    ));
    doc.line(&format!(
        "\"h2\": {{\"name\": {}, \"pass\": {}, \"detail\": {}}},",
        esc(&rep.h2.name),
        rep.h2.pass,
        esc(&rep.h2.detail)
    ));
    doc.line(&format!(
        "\"omega\": {{\"value\": {}, \"detail\": {}}},",
        opt_num(rep.omega),
        esc(&rep.omega_detail)
    ));
    doc.open("\"criteria\": [");
    for (i, c) in rep.criteria.iter().enumerate() {
        write_criterion(&mut doc, c, i + 1 == rep.criteria.len());
    }
    doc.close("],");
    write_simulation(&mut doc, sim, false);
    let notes: Vec<String> = rep.notes.iter().map(|n| esc(n)).collect();
    doc.line(&format!("\"notes\": [{}]", notes.join(", ")));
    doc.close("}");
    doc.buf
}

/// Renders a trajectory as delimited text: header `t x z`, one sample per
/// line, single spaces.
pub fn render_trajectory(traj: &Trajectory) -> String {
    let mut out = String::with_capacity(traj.t.len() * 48 + 8);
    out.push_str("t x z\n");
    for j in 0..traj.t.len() {
        let _ = writeln!(
            out,
            "{} {} {}",
            fmt_sig(traj.t[j], 12),
            fmt_sig(traj.x[j], 12),
            fmt_sig(traj.z[j], 12)
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::criteria::{analyze_all, AnalyzeOptions};
    use crate::expr::Expr;
    use crate::model::{build_problem, AnalysisConfig, ProblemSpec, Term};

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(fmt_sig(0.375, 12), "0.375");
        assert_eq!(fmt_sig(1.0 / 3.0, 12), "0.333333333333");
        assert_eq!(fmt_sig(-1.0 / 3.0, 12), "-0.333333333333");
        assert_eq!(fmt_sig(100.0, 12), "100");
        assert_eq!(fmt_sig(0.0, 12), "0");
        assert_eq!(fmt_sig(1.7543749604262384, 12), "1.75437496043");
        assert_eq!(fmt_sig(123456789.123, 5), "123460000");
        assert_eq!(fmt_sig(9.9999999999999, 3), "10");
    }

    fn term(coeff: &str, delay: &str) -> Term {
        Term::new(Expr::parse(coeff).unwrap(), Expr::parse(delay).unwrap())
    }

    #[test]
    fn report_is_valid_json_and_deterministic() {
        let spec = ProblemSpec {
            t0: 0.0,
            neutral: vec![term("1/3", "2")],
            positive: vec![term("cos(2*t)+2", "0.5")],
            negative: vec![term("cos(2*t+0.5)+1.5", "0.25")],
        };
        let cfg = AnalysisConfig::new(5.0, 40.0, 0.01);
        let problem = build_problem(&spec, &cfg).unwrap();
        let rep = analyze_all(&problem, &cfg, &AnalyzeOptions::default());

        let a = render_report(&rep, None);
        let b = render_report(&rep, None);
        assert_eq!(a, b);
        let parsed: serde_json::Value = serde_json::from_str(&a).unwrap();
        assert_eq!(parsed["schema"], REPORT_SCHEMA);
        assert_eq!(parsed["overall"], "OSCILLATORY");
        assert!(parsed["criteria"].as_array().unwrap().len() > 10);
        // Every criterion entry is complete.
        for c in parsed["criteria"].as_array().unwrap() {
            assert!(c.get("id").is_some());
            assert!(c.get("statistic").is_some());
            assert!(c.get("threshold").is_some());
            assert!(c.get("verdict").is_some());
            assert!(c.get("preconditions").is_some());
            assert!(c.get("diagnostics").is_some());
        }
        assert!(parsed["simulation"].is_null());
    }

    #[test]
    fn trajectory_text_matches_the_documented_format() {
        let spec = ProblemSpec {
            t0: 0.0,
            neutral: vec![],
            positive: vec![term("1", "pi/2")],
            negative: vec![],
        };
        let cfg = AnalysisConfig::new(2.0, 20.0, 0.01);
        let problem = build_problem(&spec, &cfg).unwrap();
        let history = Expr::parse("sin(t)").unwrap();
        let traj = crate::simulate::integrate_ndde(&problem, &history, 1.0, 0.25).unwrap();
        let text = render_trajectory(&traj);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t x z");
        assert_eq!(lines.len(), 1 + traj.t.len());
        for line in &lines[1..] {
            assert_eq!(line.split(' ').count(), 3);
        }
        let ev = SimEvidence::from_trajectory(&traj, 1.0, 4);
        assert_eq!(ev.zero_count, 1);
        assert_eq!(ev.last_zeros, vec![0.0]);
    }
}
