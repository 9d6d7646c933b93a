//! `qheat`: evaluate, scan, verify and evolve with the transformed heat kernels.
//!
//! Exit codes: 0 on success, 2 on invalid input, 1 on numeric failure or a
//! failed check.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod error;
mod expr;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::JobConfig;
use crate::error::CliError;

#[derive(Parser, Debug)]
#[command(name = "qheat", version, about = "Heat kernels for the Kohn Laplacian on quadric manifolds")]
struct Cli {
    /// JSON job configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file (written atomically); standard output if omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker thread cap.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Quadrature tolerance for `evolve`.
    #[arg(long, global = true)]
    tol: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Kernel values at the configured points, one JSON record per line.
    Eval,
    /// Kernel values on a grid in adapted coordinates, as CSV.
    Scan,
    /// Run the verification checks and print a JSON report.
    Verify {
        /// Flip the phase inside the semigroup integrand (negative control).
        #[arg(long)]
        corrupt_phase: bool,
    },
    /// Apply the heat operator to initial data, as CSV.
    Evolve,
}

fn require(config: Option<&Path>) -> Result<JobConfig, CliError> {
    let path = config.ok_or_else(|| CliError::Input("--config is required for this command".into()))?;
    JobConfig::load(path)
}

fn run(cli: &Cli) -> Result<(), CliError> {
    if let Some(threads) = cli.threads {
        if threads == 0 {
            return Err(CliError::Input("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::Input(format!("--threads: {e}")))?;
    }
    if let Some(tol) = cli.tol {
        if !(tol > 0.0 && tol < 1.0) {
            return Err(CliError::Input(format!("--tol must lie in (0, 1), got {tol}")));
        }
    }
    let config = cli.config.as_deref();
    let out = cli.out.as_deref();
    match &cli.command {
        Command::Eval => commands::eval(&require(config)?, out),
        Command::Scan => commands::scan(&require(config)?, out),
        Command::Verify { corrupt_phase } => {
            let cfg = config.map(JobConfig::load).transpose()?;
            commands::verify(cfg.as_ref(), *corrupt_phase, out)
        }
        Command::Evolve => commands::evolve(&require(config)?, cli.tol, out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("qheat: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
