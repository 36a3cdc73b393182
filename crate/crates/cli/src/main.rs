//! `gldp`: batch front end for the scenario-based solvers.
//!
//! Every subcommand reads one JSON experiment document, writes CSV/JSON
//! artifacts plus an SVG plot into the output directory, and finishes with a
//! manifest. Exit codes: 0 success, 1 config or I/O problem, 2 numerical
//! failure (stability bound, blow-up, failed inversion).

// Negated float comparisons are deliberate wherever a NaN must count as a
// violation; plot loops index parallel arrays by one counter.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod config;
mod csvio;
mod errors;
mod expr;
mod manifest;
mod runner;
mod svg;

#[derive(Parser)]
#[command(
    name = "gldp",
    version,
    about = "Small-noise forward-backward solver with volatility uncertainty and a convex penalty"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment document (one JSON object per run)
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides out_dir from the config
    #[arg(long)]
    out: Option<PathBuf>,
    /// Cap on worker threads; default is all cores
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate noisy forward paths and their worst-case gap to the zero-noise limit
    SimulateForward(RunArgs),
    /// Solve the zero-noise pair and its per-scenario compensators
    SolveLimit(RunArgs),
    /// Solve the penalized parabolic scheme for the value field at one noise level
    SolveVi(RunArgs),
    /// Run the noise ladder and fit convergence orders for all four gaps
    VerifyConvergence(RunArgs),
    /// Evaluate the action functional of a target path, directly or through the field
    RateFunction(RunArgs),
    /// Compare empirical capacity decay against the candidate-path bound
    LdpCheck(RunArgs),
}

impl Command {
    fn split(&self) -> (&'static str, &RunArgs) {
        match self {
            Command::SimulateForward(a) => ("simulate-forward", a),
            Command::SolveLimit(a) => ("solve-limit", a),
            Command::SolveVi(a) => ("solve-vi", a),
            Command::VerifyConvergence(a) => ("verify-convergence", a),
            Command::RateFunction(a) => ("rate-function", a),
            Command::LdpCheck(a) => ("ldp-check", a),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let (name, args) = cli.command.split();
    match runner::run(name, &args.config, args.out.clone(), args.workers) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}
