use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid generator config: {0}")]
    InvalidConfig(String),

    /// Both Markov states are absorbing, so the steady state depends on the
    /// initial condition.
    #[error("energy source chain is reducible (p_G = p_B = 1)")]
    ReducibleChain,

    #[error("infeasible action: cost {cost} exceeds battery level {battery}")]
    InfeasibleAction { cost: u32, battery: u32 },

    #[error("{path}:{line}: parse error: {msg}")]
    Parse { path: PathBuf, line: u64, msg: String },

    #[error("{path}:{line}: validation error: {msg}")]
    Validation { path: PathBuf, line: u64, msg: String },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("policy evaluation system is singular (unichain condition violated)")]
    Unichain,

    #[error("policy iteration did not converge within {0} iterations")]
    IterationLimit(usize),

    #[error("oracle enumeration of {0} policies exceeds the limit of {1}")]
    EnumerationLimit(u128, u128),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
