//! Energy-aware early-exit control for an energy-harvesting edge device.
//!
//! The crate models a battery-powered classifier with one early exit that is
//! recharged by an intermittent ambient source. It learns per-state exit
//! thresholds by solving an average-reward MDP, fits a causal imitation of
//! that policy, and simulates every controller to report service rate,
//! accuracy and effective accuracy.
//!
//! Module map:
//! - [`energy`]: Markov source, arrivals and battery recursion.
//! - [`trace`]: confidence traces, calibration, splits and the gap CDF.
//! - [`mdp`]: threshold MDP, policy iteration and brute-force checks.
//! - [`controllers`]: oNCC, CC, EAO and the two baselines.
//! - [`sim`]: episodes, metrics and confidence intervals.

pub mod controllers;
pub mod energy;
pub mod error;
mod linalg;
pub mod mdp;
pub mod sim;
pub mod trace;

pub use controllers::{Action, Controller, ControllerKind, ExitPredictor, PredictorMap};
pub use energy::{Condition, EnergyParams, HarvestOutcome, SystemState};
pub use error::{Error, Result};
pub use mdp::{MdpModel, PiSolution, ThresholdGrid, ThresholdPolicy};
pub use sim::{AggregateResult, EpisodeConfig, EpisodeResult};
pub use trace::{ConfidenceSample, GapDistribution, GeneratorConfig, LogitRecord, TraceSplits};

/// Random stream used for every stochastic operation in the crate.
pub type SimRng = rand_chacha::ChaCha8Rng;

/// Builds a [`SimRng`] from a 64-bit seed.
pub fn rng_from_seed(seed: u64) -> SimRng {
    use rand::SeedableRng;
    SimRng::seed_from_u64(seed)
}
