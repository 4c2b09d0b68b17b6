//! Batch command-line frontend for the run-trace classification pipeline.
//!
//! Exit codes: 0 success, 2 input/data error, 3 numeric failure during
//! training. Diagnostics go to stderr; stdout carries data.

mod commands;
mod corpus;
mod manifest;

use clap::{Parser, Subcommand};
use runtrace_core::nn::NnError;

#[derive(Parser)]
#[command(
    name = "runtrace",
    about = "Classify x86 run traces as malicious or benign with a bidirectional LSTM",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Split a run-trace file into basic blocks, one block per line
    Segment(commands::segment::SegmentArgs),
    /// Train a classifier on a labeled corpus directory
    Train(Box<commands::train::TrainArgs>),
    /// Evaluate a saved model on a labeled corpus directory
    Eval(commands::eval::EvalArgs),
    /// Print per-sequence verdicts for a single trace file
    Predict(commands::predict::PredictArgs),
    /// Generate a synthetic labeled corpus
    Synth(commands::synth::SynthArgs),
}

const EXIT_DATA_ERROR: i32 = 2;
const EXIT_NUMERIC_ERROR: i32 = 3;

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Segment(args) => commands::segment::run(args),
        Command::Train(args) => commands::train::run(*args),
        Command::Eval(args) => commands::eval::run(args),
        Command::Predict(args) => commands::predict::run(args),
        Command::Synth(args) => commands::synth::run(args),
    };
    if let Err(err) = result {
        eprintln!("error: {err:#}");
        let code = match err.downcast_ref::<NnError>() {
            Some(NnError::NumericFailure { .. }) => EXIT_NUMERIC_ERROR,
            _ => EXIT_DATA_ERROR,
        };
        std::process::exit(code);
    }
}
