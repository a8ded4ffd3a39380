//! The graspkit command line: deterministic pipelines over the library
//! modules. Every subcommand is a pure function of its inputs, flags and
//! seed; exit codes are 0 on success, 1 on internal errors or failed
//! checks, and 2 on user-input errors.

mod commands;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::Failure;

#[derive(Parser)]
#[command(
    name = "graspkit",
    version,
    about = "Instance-wise grasp synthesis toolkit: dataset import, grasp-map codecs, prototype assembly inference and evaluation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Import external annotation files into canonical JSON-lines scenes
    Import(commands::import::ImportArgs),
    /// Encode scene annotations into per-object grasp-map tensors (GKT1)
    Encode(commands::encode::EncodeArgs),
    /// Decode grasp candidates from a grasp-map tensor
    Decode(commands::decode::DecodeArgs),
    /// Assemble prototype masks per detection and decode grasps
    Infer(commands::infer::InferArgs),
    /// Evaluate predicted scenes against ground truth
    Eval(commands::eval::EvalArgs),
    /// Accuracy sweep over IoU and angle threshold grids (CSV)
    Sweep(commands::eval::SweepArgs),
    /// Check the analytic grasp-loss gradient against finite differences
    Gradcheck(commands::gradcheck::GradcheckArgs),
    /// Run the built-in oracle suites with a fixed seed
    Selftest(commands::selftest::SelftestArgs),
    /// Fit detection coefficients to encoded targets over a seeded prototype bank
    FitFixture(commands::fit_fixture::FitFixtureArgs),
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("GRASPKIT_LOG", "error"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Import(args) => commands::import::run(args),
        Command::Encode(args) => commands::encode::run(args),
        Command::Decode(args) => commands::decode::run(args),
        Command::Infer(args) => commands::infer::run(args),
        Command::Eval(args) => commands::eval::run_eval(args),
        Command::Sweep(args) => commands::eval::run_sweep(args),
        Command::Gradcheck(args) => commands::gradcheck::run(args),
        Command::Selftest(args) => commands::selftest::run(args),
        Command::FitFixture(args) => commands::fit_fixture::run(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::User(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Internal(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
