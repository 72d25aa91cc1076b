//! `billiard`: closed- and open-table billiard experiments with CSV output.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod output;

use std::process::ExitCode;

use billiard_core::BilliardError;
use clap::{Parser, Subcommand};

use commands::{EscapeArgs, FitArgs, HistogramArgs, OracleArgs, ScanArgs};
use config::RunArgs;

#[derive(Debug, Parser)]
#[command(
    name = "billiard",
    version,
    about = "Billiard collision and escape statistics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Collision-count moments and the diffusion exponent.
    Simulate(RunArgs),
    /// Collision-count histogram at `--t-max`, compared with the analytic law.
    Histogram(HistogramArgs),
    /// Survival through a boundary opening and the decay exponent.
    Escape(EscapeArgs),
    /// Decay exponents over a list of polygons.
    ScanM(ScanArgs),
    /// Sampled analytic curves.
    Oracle(OracleArgs),
    /// Re-fit a power law to an existing CSV.
    Fit(FitArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate(a) => commands::simulate(a),
        Command::Histogram(a) => commands::histogram(a),
        Command::Escape(a) => commands::escape(a),
        Command::ScanM(a) => commands::scan_m(a),
        Command::Oracle(a) => commands::oracle(a),
        Command::Fit(a) => commands::fit(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                BilliardError::Validation(_) => ExitCode::from(2),
                BilliardError::Numerical(_) | BilliardError::Internal(_) => ExitCode::from(3),
            }
        }
    }
}
