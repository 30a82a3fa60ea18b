//! Command-line front end: structural analysis, regularization,
//! finite-horizon solves, and receding-horizon runs on JSON problem files.

mod commands;
mod report;
mod sysfile;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "daempc",
    about = "Regularization-based MPC for linear differential-algebraic systems",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Structural analysis: regularity, index, block sizes, route,
    /// standing assumptions.
    Analyze {
        file: String,
        /// Seed for the randomized feedback regularization.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the machine-readable report here.
        #[arg(long)]
        report: Option<String>,
    },
    /// Regularize and print the reduced system.
    Regularize {
        file: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        report: Option<String>,
    },
    /// Solve one finite-horizon optimal control problem from x0.
    Ocp {
        file: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Prediction horizon (rounded to a multiple of the shift).
        #[arg(long)]
        horizon: Option<f64>,
        /// Drop the terminal set and terminal cost.
        #[arg(long)]
        no_terminal: bool,
        #[arg(long)]
        report: Option<String>,
    },
    /// Run the receding-horizon closed loop from x0.
    Mpc {
        file: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Override the shift interval.
        #[arg(long)]
        delta: Option<f64>,
        /// Override the number of closed-loop steps.
        #[arg(long)]
        steps: Option<usize>,
        /// Write the trace as CSV.
        #[arg(long)]
        out: Option<String>,
        #[arg(long)]
        report: Option<String>,
    },
}

fn main() {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Analyze { file, seed, report } => {
            commands::cmd_analyze(file, *seed, report.as_deref())
        }
        Command::Regularize { file, seed, report } => {
            commands::cmd_regularize(file, *seed, report.as_deref())
        }
        Command::Ocp {
            file,
            seed,
            horizon,
            no_terminal,
            report,
        } => commands::cmd_ocp(file, *seed, *horizon, *no_terminal, report.as_deref()),
        Command::Mpc {
            file,
            seed,
            delta,
            steps,
            out,
            report,
        } => commands::cmd_mpc(
            file,
            *seed,
            *delta,
            *steps,
            out.as_deref(),
            report.as_deref(),
        ),
    };
    if let Err(failure) = result {
        eprintln!("error: {}", failure.message);
        std::process::exit(failure.code);
    }
}
