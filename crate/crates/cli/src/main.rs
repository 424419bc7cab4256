//! `trendscan`: multiscale comparison of epidemic time trends.

mod config;
mod run;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{SimulateArgs, TestArgs};

/// Exit status for each failure category.
pub mod exit {
    pub const OK: u8 = 0;
    /// Bad flags, values or config file (also used by argument parsing).
    pub const USAGE: u8 = 2;
    /// Input data could not be read or is unusable.
    pub const INGESTION: u8 = 3;
    /// A statistic could not be evaluated on valid input.
    pub const NUMERIC: u8 = 4;
    /// Output or cache files could not be written.
    pub const IO: u8 = 5;
}

#[derive(Parser, Debug)]
#[command(
    name = "trendscan",
    version,
    about = "Detect and localize differences between count time trends"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the multiscale test on a CSV of daily new cases.
    Test(TestArgs),
    /// Size and power study on synthetic negative-binomial panels.
    Simulate {
        #[command(subcommand)]
        kind: SimKind,
    },
}

#[derive(Subcommand, Debug)]
enum SimKind {
    /// Empirical familywise error rate under a common trend.
    Size(SimulateArgs),
    /// Empirical power when the first series follows scenario A or B.
    Power(SimulateArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Test(args) => run::cmd_test(args),
        Command::Simulate { kind } => match kind {
            SimKind::Size(a) => run::cmd_simulate(a, false),
            SimKind::Power(a) => run::cmd_simulate(a, true),
        },
    };
    match outcome {
        Ok(()) => ExitCode::from(exit::OK),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
