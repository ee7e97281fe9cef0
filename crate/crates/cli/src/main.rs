use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ehexit_cli::commands;

#[derive(Parser)]
#[command(name = "ehexit", version, about = "Energy-aware early-exit policies for energy-harvesting inference")]
struct Cli {
    /// Experiment config (TOML)
    #[arg(short, long, global = true, default_value = "ehexit.toml")]
    config: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate or ingest a confidence trace and split it
    GenTrace,
    /// Temperature-scale the configured logit file
    Calibrate,
    /// Solve for the threshold policy and fit the exit predictors
    Fit,
    /// Simulate the enabled controllers on the test split
    Simulate,
    /// Summarize simulation results into report.md
    Report,
    /// gen-trace, fit, simulate and report in sequence
    Run,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = commands::load(&cli.config).and_then(|cfg| match cli.command {
        Command::GenTrace => commands::gen_trace(&cfg),
        Command::Calibrate => commands::calibrate(&cfg),
        Command::Fit => commands::fit(&cfg),
        Command::Simulate => commands::simulate(&cfg),
        Command::Report => commands::report(&cfg),
        Command::Run => commands::run_all(&cfg),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
