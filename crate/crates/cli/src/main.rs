//! Command-line frontend for the budget allocation pipeline.
//!
//! Exit codes: 0 success, 1 validation/data error, 2 usage error.

mod artifacts;
mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use budgetalloc::Error;
use config::ConfigFile;

#[derive(Parser)]
#[command(
    name = "budgetalloc",
    version,
    about = "Budget-constrained test-time compute allocation",
    long_about = "Solve average-budget allocation over a utility table via dual binary \
                  search, train classifiers that imitate the oracle labels, and evaluate \
                  policies, baselines, and frontier sweeps."
)]
struct Cli {
    /// Optional key=value config file; explicit flags win.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Find the price matching a target budget; write the dual solution.
    Solve(commands::SolveArgs),
    /// Train a budget classifier on oracle labels.
    Train(commands::TrainArgs),
    /// Predict budgets for feature rows with a trained policy.
    Predict(commands::PredictArgs),
    /// Score an allocation; optionally emit the regret/recovery ledger.
    Eval(commands::EvalArgs),
    /// Sweep a budget grid and emit the frontier CSV.
    Sweep(commands::SweepArgs),
    /// Generate a synthetic archetype workload.
    Synth(commands::SynthArgs),
    /// Cluster accuracy curves into archetypes.
    Cluster(commands::ClusterArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let file = match ConfigFile::load(cli.config.as_deref()) {
        Ok(f) => f,
        Err(e) => return fail(e),
    };
    let result = match &cli.command {
        Command::Solve(args) => commands::solve(args, &file),
        Command::Train(args) => commands::train(args, &file),
        Command::Predict(args) => commands::predict(args, &file),
        Command::Eval(args) => commands::eval(args, &file),
        Command::Sweep(args) => commands::sweep(args, &file),
        Command::Synth(args) => commands::synth(args, &file),
        Command::Cluster(args) => commands::cluster(args, &file),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(e),
    }
}

fn fail(e: Error) -> ExitCode {
    eprintln!("error: {e}");
    match e {
        Error::Config(_) => ExitCode::from(2),
        _ => ExitCode::from(1),
    }
}
