//! Command-line front end: `analyze`, `simulate`, and `all`.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ndde_osc::config::RunConfig;
use ndde_osc::criteria::analyze_all;
use ndde_osc::model::build_problem;
use ndde_osc::report::{render_report, render_trajectory, SimEvidence};
use ndde_osc::simulate::integrate_ndde;

/// Oscillation certification for neutral delay differential equations.
#[derive(Parser)]
#[command(name = "ndde-osc", version, disable_help_subcommand = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate every criterion and emit the analysis report.
    Analyze(RunArgs),
    /// Integrate the equation and emit the trajectory samples.
    Simulate(RunArgs),
    /// Analyze, then simulate, and emit a combined report.
    All(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Path to the JSON run configuration.
    config: PathBuf,
    /// Report destination; overrides the config's `output.report`.
    /// Without either, the report goes to stdout.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Override `analysis.margin`.
    #[arg(long)]
    margin: Option<f64>,
    /// Override `analysis.m_max`.
    #[arg(long, value_name = "N")]
    m_max: Option<usize>,
    /// Criterion ids (comma separated, e.g. `A2,B2`) whose slow-variation
    /// hypothesis is asserted rather than scored.
    #[arg(long, value_delimiter = ',', value_name = "IDS")]
    assert_slow: Vec<String>,
}

/// Exit statuses: 0 = run completed (whatever the verdicts), 1 = the input
/// was rejected, 2 = a numerical procedure failed.
enum Failure {
    Validation(String),
    Numerical(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Validation(_) => 1,
            Failure::Numerical(_) => 2,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Validation(m) | Failure::Numerical(m) => m,
        }
    }
}

fn validation(e: impl std::fmt::Display) -> Failure {
    Failure::Validation(e.to_string())
}

fn numerical(e: impl std::fmt::Display) -> Failure {
    Failure::Numerical(e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let (args, do_analyze, do_simulate) = match &cli.command {
        Command::Analyze(a) => (a, true, false),
        Command::Simulate(a) => (a, false, true),
        Command::All(a) => (a, true, true),
    };

    let cfg = RunConfig::load(&args.config).map_err(validation)?;
    if cfg.output.format != "json" {
        return Err(Failure::Validation(format!(
            "unsupported output format `{}` (only `json`)",
            cfg.output.format
        )));
    }
    let spec = cfg.problem_spec().map_err(validation)?;
    let mut acfg = cfg.analysis_config().map_err(validation)?;
    if let Some(m) = args.margin {
        acfg.margin = m;
    }
    if let Some(m) = args.m_max {
        acfg.m_max = m;
    }
    let problem = build_problem(&spec, &acfg).map_err(validation)?;

    let mut evidence: Option<SimEvidence> = None;
    if do_simulate {
        let sim = cfg.simulate_section().map_err(validation)?;
        let history = cfg.history().map_err(validation)?;
        let traj = integrate_ndde(&problem, &history, sim.t_end, sim.dt).map_err(numerical)?;
        // Classification looks at the final quarter of the simulated span.
        let window = (sim.t_end - problem.t0()) / 4.0;
        evidence = Some(SimEvidence::from_trajectory(&traj, window, 8));
        let text = render_trajectory(&traj);
        match cfg.output.trajectory.as_deref() {
            Some(path) => write_file(Path::new(path), &text)?,
            None if !do_analyze => print!("{text}"),
            None => {}
        }
    }

    if do_analyze {
        let opts = cfg.analyze_options(&args.assert_slow).map_err(validation)?;
        let rep = analyze_all(&problem, &acfg, &opts);
        let text = render_report(&rep, evidence.as_ref());
        let dest = args
            .report
            .as_deref()
            .or_else(|| cfg.output.report.as_deref().map(Path::new));
        match dest {
            Some(path) => write_file(path, &text)?,
            None => print!("{text}"),
        }
    }

    Ok(())
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text)
        .map_err(|e| Failure::Validation(format!("cannot write {}: {e}", path.display())))
}
