//! Command-line driver for the radial conformal-flow laboratory.

mod commands;
mod config;
mod report;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

/// Terminal failure mapped onto the exit-code contract.
#[derive(Debug)]
pub enum Failure {
    /// Usage or configuration error: exit 1.
    Usage(String),
    /// Hypothesis violation detected and reported: exit 2.
    Violation(String),
    /// Numerical blow-up: exit 3.
    BlowUp(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Violation(_) => 2,
            Failure::BlowUp(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Violation(m) | Failure::BlowUp(m) => m,
        }
    }
}

#[derive(Parser)]
#[command(name = "yamabe", version, about = "Radial conformal-flow laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve one configuration; write trajectory.csv, diagnostics.csv, manifest.json.
    Run {
        /// JSON run configuration.
        #[arg(long)]
        config: PathBuf,
        /// Output directory.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Refinement study: simultaneous grid and time-step halvings.
    Convergence {
        #[arg(long)]
        config: PathBuf,
        /// Number of refinement levels, between 2 and 5.
        #[arg(long)]
        levels: u32,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Nested-domain Dirichlet runs compared against the full-domain run.
    CompareExhaustion {
        #[arg(long)]
        config: PathBuf,
        /// Increasing domain radii, comma separated.
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        radii: Vec<f64>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Weighted-norm report over a trajectory.csv produced by `run`.
    Norms {
        /// trajectory.csv from a previous run.
        #[arg(long)]
        trajectory: PathBuf,
        /// JSON list of norm specifications.
        #[arg(long)]
        specs: PathBuf,
        /// Spatial dimension of the run that produced the trajectory.
        #[arg(long)]
        dimension: u32,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

fn dispatch(cli: Cli) -> Result<u8, Failure> {
    match cli.command {
        Command::Run { config, out } => commands::cmd_run(&config, &out),
        Command::Convergence { config, levels, out } => {
            commands::cmd_convergence(&config, levels, &out)
        }
        Command::CompareExhaustion { config, radii, out } => {
            commands::cmd_compare_exhaustion(&config, &radii, &out)
        }
        Command::Norms { trajectory, specs, dimension, out } => {
            commands::cmd_norms(&trajectory, &specs, dimension, &out)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
