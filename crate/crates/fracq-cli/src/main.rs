//! `fracq`: a command-line harness around the library. Every subcommand
//! reads one JSON configuration, writes its artifacts into an output
//! directory, and exits 0 on success, 1 on validation failure, 2 on
//! numerical failure, and 3 on an exceeded budget.

mod config;
mod fail;
mod output;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::fail::{CliError, CliResult};

#[derive(Parser)]
#[command(
    name = "fracq",
    version,
    about = "Iterated function systems, fractal transformations, and quantization dimension"
)]
struct Cli {
    /// JSON run configuration (required by every subcommand except verify).
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Overrides the seed from the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory for artifacts (default: out_dir from the
    /// configuration, then "out").
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Worker thread count. Counts above 1 need the parallel build.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Rejects configurations containing unknown fields.
    #[arg(long, global = true)]
    strict: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve sum(c_i^s) = 1 for the similarity dimension s.
    SolveMoran,
    /// Solve the order-r quantization exponent from probabilities and ratios.
    QdimExponent,
    /// Enumerate a depth-k attractor sample.
    Attractor,
    /// Compute greedy address codes for the configured points.
    Tops,
    /// Sample the graph of the fractal transformation between two systems.
    TransformGraph,
    /// Run the seeded chaos game for the invariant measure.
    ChaosGame,
    /// Quantize a measure with Lloyd restarts or the exact 1-D solver.
    Quantize,
    /// Estimate the quantization dimension from a cluster-count sweep.
    EstimateQdim,
    /// Fit a box-counting dimension over a scale grid.
    BoxDim,
    /// Emit a dimension report with analytic bounds and estimates.
    Report,
    /// Run the full acceptance battery.
    Verify,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = setup_threads(cli.threads) {
        eprintln!("error: {}", e);
        return e.exit_code();
    }
    match dispatch(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e);
            e.exit_code()
        }
    }
}

fn dispatch(cli: &Cli) -> CliResult<ExitCode> {
    if matches!(cli.command, Command::Verify) {
        return run::verify(cli.out.as_deref());
    }
    let path = cli.config.as_ref().ok_or_else(|| {
        CliError::Validation("--config <FILE> is required for this subcommand".into())
    })?;
    let mut cfg = config::load(path, cli.strict)?;
    if let Some(seed) = cli.seed {
        cfg.seed = Some(seed);
    }
    let out_dir = cli
        .out
        .clone()
        .or_else(|| cfg.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    let artifacts = match cli.command {
        Command::SolveMoran => run::solve_moran(&cfg)?,
        Command::QdimExponent => run::qdim_exponent(&cfg)?,
        Command::Attractor => run::attractor(&cfg)?,
        Command::Tops => run::tops(&cfg)?,
        Command::TransformGraph => run::transform_graph(&cfg)?,
        Command::ChaosGame => run::chaos_game(&cfg)?,
        Command::Quantize => run::quantize(&cfg)?,
        Command::EstimateQdim => run::estimate_qdim(&cfg)?,
        Command::BoxDim => run::box_dim(&cfg)?,
        Command::Report => run::report(&cfg)?,
        Command::Verify => unreachable!("handled above"),
    };
    artifacts.commit(&out_dir)?;
    Ok(ExitCode::SUCCESS)
}

#[cfg(feature = "parallel")]
fn setup_threads(threads: Option<usize>) -> CliResult<()> {
    let Some(n) = threads else { return Ok(()) };
    if n < 1 {
        return Err(CliError::Validation("--threads must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Validation(format!("thread pool: {}", e)))
}

#[cfg(not(feature = "parallel"))]
fn setup_threads(threads: Option<usize>) -> CliResult<()> {
    match threads {
        Some(n) if n > 1 => Err(CliError::Validation(
            "this build is sequential; rebuild with the parallel feature for --threads > 1".into(),
        )),
        _ => Ok(()),
    }
}
