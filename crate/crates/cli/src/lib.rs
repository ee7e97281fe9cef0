//! Command implementations behind the `ehexit` binary. Each command reads
//! the experiment config, consumes artifacts from the output directory and
//! writes its own artifacts there under fixed names.

pub mod commands;
pub mod config;
mod report;

use std::path::PathBuf;

pub use config::ExperimentConfig;

pub const TRACE_EST: &str = "trace_est.csv";
pub const TRACE_NB: &str = "trace_nb.csv";
pub const TRACE_TEST: &str = "trace_test.csv";
pub const TRACE_CALIBRATED: &str = "trace_calibrated.csv";
pub const POLICY: &str = "policy.csv";
pub const PREDICTOR: &str = "predictor.csv";
pub const SUMMARY: &str = "summary.csv";
pub const REPORT: &str = "report.md";

pub fn trajectory_file(name: &str) -> String {
    format!("trajectory_{name}.csv")
}

pub fn episodes_file(name: &str) -> String {
    format!("episodes_{name}.csv")
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid config:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),

    #[error("missing {path}; run `ehexit {step}` first")]
    MissingArtifact { path: PathBuf, step: &'static str },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Core(#[from] ehexit_core::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use ehexit_core::Error as E;
        match self {
            CliError::Config(_) => 2,
            CliError::MissingArtifact { .. } => 3,
            CliError::Numerical(_) | CliError::Core(E::Unichain | E::IterationLimit(_)) => 4,
            _ => 1,
        }
    }
}
