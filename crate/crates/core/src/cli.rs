//! Command-line surface: `assess`, `plot` and `simulate`.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 invalid input or flags,
//! 3 degenerate statistics.

use std::ffi::OsString;
use std::fs::File;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::dataset::parse_dataset;
use crate::error::{Error, Result};
use crate::plot::{render_plot, PlotSpec};
use crate::report::{assess, ApproachSelection, AssessOptions, Assessment, TestSelection};
use crate::simulation::{self, run_monte_carlo_with_workers, Beta, ScenarioSpec, TestKind, Truth};

/// Environment variable holding the number of simulation worker threads.
pub const WORKERS_ENV: &str = "ITECAL_WORKERS";

#[derive(Debug, Parser)]
#[command(name = "itecal", version, about = "Cumulative calibration assessment of predicted treatment effects")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run calibration tests on a validation dataset.
    Assess(AssessArgs),
    /// Draw the standardized calibration path of a validation dataset.
    Plot(AssessArgs),
    /// Monte Carlo rejection rates for a simulation scenario.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ApproachArg {
    Conditional,
    Marginal,
    Both,
    PerArm,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum TestArg {
    Bm,
    Bridge,
    BridgeOnly,
    Both,
}

#[derive(Debug, Args)]
struct AssessArgs {
    /// CSV file with columns arm, outcome, delta [, pi, order_key].
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value = "marginal")]
    approach: ApproachArg,
    #[arg(long, value_enum, default_value = "bridge")]
    test: TestArg,
    /// Order subjects by this column instead of the predicted effect.
    #[arg(long)]
    order_by: Option<String>,
    /// Significance level for decisions and plot guides.
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Write the JSON report here.
    #[arg(long)]
    json: Option<PathBuf>,
    /// Write the SVG plot here.
    #[arg(long)]
    plot: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Simulation set: 1 (null), 2 (logit-linear), 3 (power transform).
    #[arg(long)]
    set: u8,
    /// Reference model coefficients, e.g. `b0=-1,bx=0.25,ba=-1,bxa=0.25`.
    #[arg(long)]
    cell: Option<String>,
    /// Built-in scenario id for sets 2 and 3 (e.g. `s12`).
    #[arg(long)]
    scenario: Option<String>,
    /// Set 2 location shift among the treated.
    #[arg(long, allow_negative_numbers = true)]
    alpha: Option<f64>,
    /// Set 2 scale factor among the treated.
    #[arg(long, allow_negative_numbers = true)]
    gamma: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    alpha0: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    gamma0: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    alpha1: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    gamma1: Option<f64>,
    #[arg(long, default_value_t = 500)]
    n: usize,
    #[arg(long, default_value_t = 2000)]
    reps: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Write the JSON summary here.
    #[arg(long)]
    json: Option<PathBuf>,
    /// Write the text table here (it is always printed to stdout).
    #[arg(long)]
    table: Option<PathBuf>,
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io(_) => 1,
        e if e.is_degenerate() => 3,
        _ => 2,
    }
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let res = match cli.command {
        Command::Assess(a) => run_assess(&a, false),
        Command::Plot(a) => run_assess(&a, true),
        Command::Simulate(s) => run_simulate(&s),
    };
    match res {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn write_file(path: &Path, body: &str) -> Result<()> {
    std::fs::write(path, body).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn assessment(a: &AssessArgs) -> Result<Assessment> {
    if !(a.alpha > 0.0 && a.alpha < 1.0) {
        return Err(Error::InvalidScenario(format!("alpha must be in (0, 1), got {}", a.alpha)));
    }
    let file = File::open(&a.input).map_err(|e| Error::Io(format!("{}: {e}", a.input.display())))?;
    let records = parse_dataset(file, a.order_by.as_deref())?;
    let opts = AssessOptions {
        approach: match a.approach {
            ApproachArg::Conditional => ApproachSelection::Conditional,
            ApproachArg::Marginal => ApproachSelection::Marginal,
            ApproachArg::Both => ApproachSelection::Both,
            ApproachArg::PerArm => ApproachSelection::PerArm,
        },
        test: match a.test {
            TestArg::Bm => TestSelection::Bm,
            TestArg::Bridge => TestSelection::Bridge,
            TestArg::BridgeOnly => TestSelection::BridgeOnly,
            TestArg::Both => TestSelection::Both,
        },
        order_column: a.order_by.clone(),
        alpha: a.alpha,
    };
    assess(records, &opts)
}

fn run_assess(a: &AssessArgs, plot_only: bool) -> Result<()> {
    if plot_only && a.plot.is_none() {
        return Err(Error::InvalidScenario("`plot` needs --plot <file>".into()));
    }
    let result = assessment(a)?;
    let json = result.report.to_json();
    if let Some(path) = &a.json {
        write_file(path, &json)?;
    } else if !plot_only {
        println!("{json}");
    }
    if let Some(path) = &a.plot {
        let mut spec = PlotSpec::new(result.paths);
        spec.alpha = a.alpha;
        spec.bridge_guide = !matches!(a.test, TestArg::Bm);
        if let Some(col) = &a.order_by {
            spec.top_axis_label = col.clone();
        }
        if matches!(a.approach, ApproachArg::PerArm) {
            spec.top_axis_label = "Predicted risk".into();
        }
        write_file(path, &render_plot(&spec)?)?;
    }
    for w in &result.report.warnings {
        eprintln!("warning: {w}");
    }
    Ok(())
}

/// Parses `b0=-1,bx=0.25,ba=-1,bxa=0.25`; omitted keys keep the reference value.
fn parse_cell(text: &str) -> Result<Beta> {
    let mut beta = Beta::REFERENCE;
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let bad = || Error::InvalidScenario(format!("bad --cell entry `{part}`"));
        let (k, v) = part.split_once('=').ok_or_else(bad)?;
        let v: f64 = v.trim().parse().map_err(|_| bad())?;
        match k.trim() {
            "b0" => beta.b0 = v,
            "bx" => beta.bx = v,
            "ba" => beta.ba = v,
            "bxa" => beta.bxa = v,
            _ => return Err(bad()),
        }
    }
    Ok(beta)
}

fn scenario(s: &SimulateArgs) -> Result<ScenarioSpec> {
    let beta = match &s.cell {
        Some(c) => parse_cell(c)?,
        None => Beta::REFERENCE,
    };
    let missing = |name: &str| Error::InvalidScenario(format!("set {} needs --{name} or --scenario", s.set));
    let (truth, id) = match (s.set, &s.scenario) {
        (1, None) => (Truth::Reference, None),
        (1, Some(_)) => return Err(Error::InvalidScenario("set 1 takes --cell, not --scenario".into())),
        (2 | 3, Some(id)) => (simulation::lookup(s.set, id)?.truth, Some(id.clone())),
        (2, None) => (
            Truth::LogitLinear {
                alpha: s.alpha.ok_or_else(|| missing("alpha"))?,
                gamma: s.gamma.ok_or_else(|| missing("gamma"))?,
            },
            None,
        ),
        (3, None) => (
            Truth::PowerTransform {
                alpha0: s.alpha0.ok_or_else(|| missing("alpha0"))?,
                gamma0: s.gamma0.ok_or_else(|| missing("gamma0"))?,
                alpha1: s.alpha1.ok_or_else(|| missing("alpha1"))?,
                gamma1: s.gamma1.ok_or_else(|| missing("gamma1"))?,
            },
            None,
        ),
        (other, _) => return Err(Error::UnknownScenario(format!("set {other}"))),
    };
    let mut spec = ScenarioSpec::new(beta, truth, s.n, s.reps, s.seed);
    spec.id = id;
    spec.validate()?;
    Ok(spec)
}

/// Worker count from [`WORKERS_ENV`], defaulting to the available parallelism.
pub fn worker_count() -> usize {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&w| w > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
}

fn run_simulate(s: &SimulateArgs) -> Result<()> {
    let spec = scenario(s)?;
    let summary = run_monte_carlo_with_workers(&spec, &TestKind::ALL, worker_count())?;
    let table = summary.to_table();
    print!("{table}");
    if let Some(path) = &s.json {
        write_file(path, &summary.to_json())?;
    }
    if let Some(path) = &s.table {
        write_file(path, &table)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cell_parsing() {
        let b = parse_cell("b0=-1,bx=0.25,ba=-1,bxa=0.25").unwrap();
        assert_eq!((b.b0, b.bx, b.ba, b.bxa), (-1.0, 0.25, -1.0, 0.25));
        assert!(parse_cell("b0=x").is_err());
        assert!(parse_cell("bz=1").is_err());
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::MissingBaselineRisk { index: 0 }), 2);
        assert_eq!(exit_code(&Error::degenerate("x")), 3);
        assert_eq!(exit_code(&Error::Io("x".into())), 1);
    }
}
