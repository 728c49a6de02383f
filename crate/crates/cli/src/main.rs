//! `tcl-rl`: simulate the feeder, sweep constant gains, train and evaluate
//! Q-learning voltage control.

mod commands;
mod config;
mod output;

use std::fmt;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

/// Bad flag value or inconsistent configuration. Exit code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

/// Missing or malformed input file. Exit code 3.
#[derive(Debug)]
pub struct InputError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Display for InputError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}
impl std::error::Error for InputError {}

#[derive(Parser, Debug)]
#[command(name = "tcl-rl", version, about = "Voltage control of a thermostatic load feeder")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// One episode under a fixed gain or the baseline; writes trajectory.csv.
    Simulate(commands::SimulateArgs),
    /// Baseline and constant-gain MSE statistics; writes sweep.csv.
    Sweep(commands::SweepArgs),
    /// Q-learning repeats with greedy testing; writes curves, test MSEs and Q-tables.
    Train(commands::TrainArgs),
    /// Greedy test episodes of a saved Q-table; writes test_mse.csv.
    Evaluate(commands::EvaluateArgs),
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.is::<UsageError>() {
        return 2;
    }
    if err.is::<InputError>() {
        return 3;
    }
    match err.downcast_ref::<tcl_rl::Error>() {
        Some(tcl_rl::Error::InvalidParameter(_)) => 2,
        Some(
            tcl_rl::Error::Io(_)
            | tcl_rl::Error::Parse { .. }
            | tcl_rl::Error::InvalidInput(_)
            | tcl_rl::Error::DegenerateData(_)
            | tcl_rl::Error::InvalidState { .. },
        ) => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(args) => commands::simulate(args, &argv),
        Command::Sweep(args) => commands::sweep(args, &argv),
        Command::Train(args) => commands::train(args, &argv),
        Command::Evaluate(args) => commands::evaluate(args, &argv),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
