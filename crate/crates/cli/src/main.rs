//! `rbl`: anchorless rigid-body localization from range measurements.
//!
//! Subcommands:
//! - `simulate`: seeded Monte-Carlo RMSE sweep over a ranging-error grid.
//! - `estimate`: one egoistic pose estimate from CSV measurements.
//! - `complete`: distance-block completion only.
//! - `mds`: classical MDS embedding only.
//!
//! Exit codes: 0 success, 1 invalid input, 2 numerical failure (stage name
//! on standard error).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use rbl_core::error::{EmbedError, Error, MeasureError, PipelineError, Stage};
use rbl_core::estimators::egoistic_localize;
use rbl_core::harness::{emit_outputs, Experiment, ExperimentConfig};
use rbl_core::measure::nystrom_complete;
use rbl_core::embed_align::classical_mds;
use rbl_core::numkit::{matrix_to_csv, read_matrix_csv};
use rbl_core::scene::{exact_edm, ConformationMatrix};

#[derive(Parser)]
#[command(name = "rbl", version, about = "Anchorless rigid-body localization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte-Carlo RMSE experiment from a JSON config.
    Simulate(SimulateArgs),
    /// Estimate the unknown body's pose from CSV measurements.
    Estimate(EstimateArgs),
    /// Complete the unknown intra-body distance block.
    Complete(CompleteArgs),
    /// Embed a full distance matrix with classical MDS.
    Mds(MdsArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Experiment config (JSON). `{}` selects all defaults.
    #[arg(long)]
    config: PathBuf,
    /// Output directory override.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Master seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Trials-per-sigma override.
    #[arg(long)]
    trials: Option<usize>,
}

#[derive(Args)]
struct EstimateArgs {
    /// Observer conformation, 3xN CSV.
    #[arg(long)]
    c1: PathBuf,
    /// Measured cross-body distances, N1xN2 CSV.
    #[arg(long)]
    d12: PathBuf,
    /// Observer intra-body distances; computed from --c1 when omitted.
    #[arg(long)]
    d1: Option<PathBuf>,
}

#[derive(Args)]
struct CompleteArgs {
    /// Known intra-body distance block, N1xN1 CSV.
    #[arg(long)]
    d1: PathBuf,
    /// Cross-body distance block, N1xN2 CSV.
    #[arg(long)]
    d12: PathBuf,
}

#[derive(Args)]
struct MdsArgs {
    /// Full distance matrix, NxN CSV.
    #[arg(long)]
    edm: PathBuf,
}

/// 1 for bad input, 2 for numerical failures inside the estimation stages.
/// Numerical failures always arrive stage-tagged so the stage name reaches
/// standard error.
fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Pipeline(_) => 2,
        _ => 1,
    }
}

fn run_simulate(args: SimulateArgs) -> Result<String, Error> {
    let mut config = ExperimentConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        config.master_seed = seed;
    }
    if let Some(trials) = args.trials {
        config.trials = trials;
    }
    if let Some(dir) = args.out_dir {
        config.out_dir = Some(dir);
    }
    config.validate()?;
    let out_dir = config.out_dir.clone().unwrap_or_else(|| PathBuf::from("out"));
    let experiment = Experiment::prepare(config.clone())?;
    let rows = experiment.run();
    let mut report = String::new();
    for row in &rows {
        report.push_str(&format!("sigma={}", row.sigma));
        for entry in &row.entries {
            match entry.rmse {
                Some(v) => report
                    .push_str(&format!(" rmse_{}={v}", entry.estimator.column_key())),
                None => report.push_str(&format!(" rmse_{}=NaN", entry.estimator.column_key())),
            }
            if entry.failures > 0 {
                report.push_str(&format!(
                    " failures_{}={}",
                    entry.estimator.column_key(),
                    entry.failures
                ));
            }
        }
        report.push_str(&format!(" n_trials={}\n", row.n_trials));
    }
    let files = emit_outputs(&rows, &config.translation_estimators(), &out_dir)?;
    report.push_str(&format!("wrote {}\n", files.csv.display()));
    report.push_str(&format!("wrote {}\n", files.svg.display()));
    Ok(report)
}

fn run_estimate(args: EstimateArgs) -> Result<String, Error> {
    let c1 = ConformationMatrix::new(read_matrix_csv(&args.c1)?)?;
    let d12 = read_matrix_csv(&args.d12)?;
    let d1 = match &args.d1 {
        Some(path) => read_matrix_csv(path)?,
        None => exact_edm(c1.matrix(), c1.matrix())?,
    };
    let out = egoistic_localize(&c1, &d1, &d12)?;
    let t = out.translation.t_hat;
    let mut report = format!("t_hat: {} {} {}\nq_hat:\n", t[0], t[1], t[2]);
    let q = out.rotation.q_hat.matrix();
    for i in 0..3 {
        report.push_str(&format!("{} {} {}\n", q[(i, 0)], q[(i, 1)], q[(i, 2)]));
    }
    eprintln!(
        "rotation ambiguity set size {}; translation {} after {} iterations",
        out.rotation.ambiguity_set_size,
        if out.translation.converged {
            "converged"
        } else {
            "stopped"
        },
        out.translation.iterations
    );
    Ok(report)
}

fn run_complete(args: CompleteArgs) -> Result<String, Error> {
    let d1 = read_matrix_csv(&args.d1)?;
    let d12 = read_matrix_csv(&args.d12)?;
    let completed = nystrom_complete(&d1, &d12).map_err(|e| match e {
        MeasureError::IllConditionedBlock { .. } => {
            Error::Pipeline(PipelineError::new(Stage::Completion, e))
        }
        other => Error::Measure(other),
    })?;
    if completed.clamp_count > 0 {
        eprintln!("clamped {} negative entries", completed.clamp_count);
    }
    Ok(matrix_to_csv(&completed.matrix))
}

fn run_mds(args: MdsArgs) -> Result<String, Error> {
    let edm = read_matrix_csv(&args.edm)?;
    let embedding = classical_mds(&edm, 3).map_err(|e| match e {
        EmbedError::DegenerateGeometry { .. } | EmbedError::AmbiguousRegistration { .. } => {
            Error::Pipeline(PipelineError::new(Stage::Mds, e))
        }
        other => Error::Embed(other),
    })?;
    if embedding.negative_discarded > 0 {
        eprintln!(
            "discarded {} negative eigenvalues",
            embedding.negative_discarded
        );
    }
    Ok(matrix_to_csv(&embedding.points))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // Help and version are not errors.
            return match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    print!("{err}");
                    ExitCode::SUCCESS
                }
                _ => {
                    eprint!("{err}");
                    ExitCode::from(1)
                }
            };
        }
    };
    let result = match cli.command {
        Command::Simulate(args) => run_simulate(args),
        Command::Estimate(args) => run_estimate(args),
        Command::Complete(args) => run_complete(args),
        Command::Mds(args) => run_mds(args),
    };
    match result {
        Ok(report) => {
            // A closed pipe (e.g. piping into `head`) is not a failure.
            use std::io::Write;
            let _ = std::io::stdout().write_all(report.as_bytes());
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}
