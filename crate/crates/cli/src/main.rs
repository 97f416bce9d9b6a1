//! Command-line front end: generate synthetic data, train the glucose
//! forecasting models, evaluate them clinically, and export attention-based
//! contribution profiles.
//!
//! Exit codes: 0 success, 1 usage/contract error, 2 data or format error,
//! 3 numeric failure.

mod commands;
mod config;

use clap::{Parser, Subcommand};
use retain_core::Error;

#[derive(Parser, Debug)]
#[command(name = "retain", version, about = "Interpretable glucose forecasting")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate per-patient CGM datasets
    Generate(commands::GenerateArgs),
    /// Train a model per leave-one-patient-out fold
    Train(commands::TrainArgs),
    /// Score trained models (RMSE, MAPE, time lag, CG-EGA)
    Evaluate(commands::EvaluateArgs),
    /// Export contribution profiles from a trained attention model
    Interpret(commands::InterpretArgs),
}

fn exit_code(error: &Error) -> i32 {
    match error {
        Error::Format(_) | Error::Io(_) => 2,
        Error::Numeric(_) | Error::Consistency(_) => 3,
        _ => 1,
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help/version print and exit cleanly; everything else is usage
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    let result = match &cli.command {
        Command::Generate(args) => commands::cmd_generate(args),
        Command::Train(args) => commands::cmd_train(args),
        Command::Evaluate(args) => commands::cmd_evaluate(args),
        Command::Interpret(args) => commands::cmd_interpret(args),
    };
    if let Err(e) = result {
        eprintln!("error: {}", e);
        std::process::exit(exit_code(&e));
    }
}
