//! Command-line front end: run the experiment matrix, compare result
//! bundles, or print the decomposition of a template over a placement.
//!
//! Exit codes: 0 success, 2 usage or input error, 3 calibration failure,
//! 4 deployment failure, 5 conservation violation, 6 comparison mismatch,
//! 7 filesystem error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use vnpaas_core::analysis::Setup;
use vnpaas_core::experiment::{
    cells_from_runs, cells_from_samples, compare, load_bundle, run_matrix, summarize_cells,
    write_bundle, CellStats, ExperimentConfig, IsolationReport, RunError, Side,
};
use vnpaas_core::orchestrator::{decompose, PlacementSpec};
use vnpaas_core::template::ServiceTemplate;

#[derive(Parser)]
#[command(
    name = "vnpaas",
    about = "Deterministic simulator for zone-based NFV orchestration and diameter front-end queueing",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment matrix and write a result bundle.
    Run(RunArgs),
    /// Compare the full and split result bundles of two runs.
    Compare(CompareArgs),
    /// Decompose a service template over a placement and print the plan.
    Decompose(DecomposeArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Experiment configuration file (TOML); defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Restrict the matrix to one setup (full or split).
    #[arg(long)]
    setup: Option<String>,
    /// Restrict the matrix to one target utilization level.
    #[arg(long)]
    r: Option<f64>,
    /// Repetitions per cell.
    #[arg(long)]
    reps: Option<u32>,
    /// Simulated seconds of traffic per run.
    #[arg(long = "duration-s")]
    duration_s: Option<u64>,
    /// Master seed; everything else derives from it.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for the result bundle.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct CompareArgs {
    /// Result bundle of the full deployment.
    #[arg(long)]
    full: PathBuf,
    /// Result bundle of the split deployment.
    #[arg(long)]
    split: PathBuf,
}

#[derive(Args)]
struct DecomposeArgs {
    /// Service template document.
    #[arg(long)]
    template: PathBuf,
    /// Placement document: zone universe plus node assignments.
    #[arg(long)]
    placement: PathBuf,
}

const EXIT_USAGE: u8 = 2;
const EXIT_CALIBRATION: u8 = 3;
const EXIT_DEPLOYMENT: u8 = 4;
const EXIT_CONSERVATION: u8 = 5;
const EXIT_COMPARE: u8 = 6;
const EXIT_IO: u8 = 7;

fn fail(code: u8, message: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {message}");
    ExitCode::from(code)
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run(args) => run(args),
        Command::Compare(args) => run_compare(args),
        Command::Decompose(args) => run_decompose(args),
    }
}

fn load_config(args: &RunArgs) -> Result<ExperimentConfig, ExitCode> {
    let mut config = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| fail(EXIT_IO, format!("{}: {e}", path.display())))?;
            ExperimentConfig::parse(&text).map_err(|e| fail(EXIT_USAGE, e))?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(setup) = &args.setup {
        let setup = Setup::from_str(setup).map_err(|e| fail(EXIT_USAGE, e))?;
        config.setups = vec![setup];
    }
    if let Some(r) = args.r {
        config.r_levels = vec![r];
    }
    if let Some(reps) = args.reps {
        config.repetitions = reps;
    }
    if let Some(duration_s) = args.duration_s {
        config.duration_s = duration_s;
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    config.validate().map_err(|e| fail(EXIT_USAGE, e))?;
    Ok(config)
}

fn run(args: RunArgs) -> ExitCode {
    let config = match load_config(&args) {
        Ok(config) => config,
        Err(code) => return code,
    };
    let (_rates, results) = match run_matrix(&config) {
        Ok(outcome) => outcome,
        Err(error) => {
            let code = match &error {
                RunError::Calibration { .. } => EXIT_CALIBRATION,
                RunError::Deployment { .. } => EXIT_DEPLOYMENT,
                RunError::Conservation { .. } => EXIT_CONSERVATION,
            };
            return fail(code, error);
        }
    };
    let cells = cells_from_runs(&results, config.grubbs_alpha);
    let summary = summarize_cells(&cells);
    if let Err(error) = write_bundle(&args.out, &results, &cells, &summary) {
        return fail(EXIT_IO, error);
    }
    if let Some(report) = isolation_report(&cells, config.duration_s) {
        let path = args.out.join("isolation.txt");
        if let Err(error) = fs::write(&path, report.render()) {
            return fail(EXIT_IO, format!("{}: {error}", path.display()));
        }
    }
    print!("{summary}");
    println!(
        "{} runs written to {}",
        results.len(),
        args.out.display()
    );
    ExitCode::SUCCESS
}

/// Build the cross-setup report when the bundle covers both setups.
fn isolation_report(cells: &[CellStats], duration_s: u64) -> Option<IsolationReport> {
    let full: Vec<CellStats> = cells
        .iter()
        .filter(|c| c.setup == Setup::Full)
        .cloned()
        .collect();
    let split: Vec<CellStats> = cells
        .iter()
        .filter(|c| c.setup == Setup::Split)
        .cloned()
        .collect();
    if full.is_empty() || split.is_empty() {
        return None;
    }
    compare(
        &Side { duration_s, cells: full },
        &Side { duration_s, cells: split },
    )
    .ok()
}

fn side_from_bundle(dir: &Path, expected: Setup) -> Result<Side, ExitCode> {
    let (meta, samples) = load_bundle(dir).map_err(|e| fail(EXIT_IO, e))?;
    if meta.runs.is_empty() {
        return Err(fail(
            EXIT_COMPARE,
            format!("{}: bundle contains no runs", dir.display()),
        ));
    }
    for run in &meta.runs {
        if run.setup != expected.to_string() {
            return Err(fail(
                EXIT_COMPARE,
                format!(
                    "{}: run {} is a {} run, expected {expected}",
                    dir.display(),
                    run.run_id,
                    run.setup
                ),
            ));
        }
        if !run.audit_ok {
            return Err(fail(
                EXIT_CONSERVATION,
                format!("{}: run {} failed its audit", dir.display(), run.run_id),
            ));
        }
    }
    let duration_s = meta.runs[0].duration_s;
    if meta.runs.iter().any(|run| run.duration_s != duration_s) {
        return Err(fail(
            EXIT_COMPARE,
            format!("{}: bundle mixes run durations", dir.display()),
        ));
    }
    // Alpha matches the run-side default; the bundle carries filtered output
    // already grouped per run, so re-filtering here keeps both sides equal.
    Ok(Side {
        duration_s,
        cells: cells_from_samples(&samples, 0.05),
    })
}

fn run_compare(args: CompareArgs) -> ExitCode {
    let full = match side_from_bundle(&args.full, Setup::Full) {
        Ok(side) => side,
        Err(code) => return code,
    };
    let split = match side_from_bundle(&args.split, Setup::Split) {
        Ok(side) => side,
        Err(code) => return code,
    };
    match compare(&full, &split) {
        Ok(report) => {
            print!("{}", report.render());
            ExitCode::SUCCESS
        }
        Err(error) => fail(EXIT_COMPARE, error),
    }
}

fn run_decompose(args: DecomposeArgs) -> ExitCode {
    let template_text = match fs::read_to_string(&args.template) {
        Ok(text) => text,
        Err(error) => return fail(EXIT_IO, format!("{}: {error}", args.template.display())),
    };
    let template = match ServiceTemplate::parse(&template_text) {
        Ok(template) => template,
        Err(error) => return fail(EXIT_USAGE, error),
    };
    let placement_text = match fs::read_to_string(&args.placement) {
        Ok(text) => text,
        Err(error) => return fail(EXIT_IO, format!("{}: {error}", args.placement.display())),
    };
    let placement = match PlacementSpec::parse(&placement_text) {
        Ok(placement) => placement,
        Err(error) => return fail(EXIT_USAGE, error),
    };
    match decompose(&template, &placement.placement(), &placement.zone_set()) {
        Ok(plan) => {
            print!("{}", plan.serialize());
            ExitCode::SUCCESS
        }
        Err(error) => fail(EXIT_USAGE, error),
    }
}
