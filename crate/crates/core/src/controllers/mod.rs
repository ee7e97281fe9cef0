//! Decision rules for each slot: the optimal non-causal controller (oNCC),
//! its causal imitation (CC), the energy-agnostic oracle (EAO), and the
//! always-exit / always-continue baselines.

mod predictor;

use rand::Rng;

use crate::energy::{EnergyParams, SystemState};
use crate::mdp::ThresholdPolicy;
use crate::trace::ConfidenceSample;
use crate::SimRng;

pub use predictor::{fit_exit_predictor, predict_exit_prob, ExitPredictor, PredictorMap, VARIANCE_FLOOR};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Action {
    Discard,
    ExitEarly,
    ContinueFull,
    /// Zero-energy random guess, available to the EAO only.
    FreeGuess,
}

impl Action {
    pub fn cost(self, params: &EnergyParams) -> u32 {
        match self {
            Action::Discard | Action::FreeGuess => 0,
            Action::ExitEarly => params.u_exit,
            Action::ContinueFull => params.u_continue,
        }
    }

    pub fn is_served(self) -> bool {
        self != Action::Discard
    }
}

/// The five controllers, in reporting order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ControllerKind {
    AlwaysContinue,
    AlwaysExit,
    Eao,
    Oncc,
    Cc,
}

impl ControllerKind {
    pub const ALL: [ControllerKind; 5] = [
        ControllerKind::AlwaysContinue,
        ControllerKind::AlwaysExit,
        ControllerKind::Eao,
        ControllerKind::Oncc,
        ControllerKind::Cc,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ControllerKind::AlwaysContinue => "always_continue",
            ControllerKind::AlwaysExit => "always_exit",
            ControllerKind::Eao => "eao",
            ControllerKind::Oncc => "oncc",
            ControllerKind::Cc => "cc",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }

    /// Stable id mixed into episode seeds.
    pub fn id(self) -> u64 {
        self as u64 + 1
    }
}

/// Forced actions below `u_c`: discard when `b < u_e`, exit otherwise.
fn forced(b: u32, u_exit: u32, u_continue: u32) -> Option<Action> {
    if b < u_exit {
        Some(Action::Discard)
    } else if b < u_continue {
        Some(Action::ExitEarly)
    } else {
        None
    }
}

/// Threshold rule: exit iff `z_e + gamma_s >= z_c`.
pub fn oncc_decide(state: SystemState, z_e: f64, z_c: f64, policy: &ThresholdPolicy) -> Action {
    if let Some(a) = forced(state.b, policy.u_exit, policy.u_continue) {
        return a;
    }
    let gamma = policy.gamma(&state).expect("policy covers every state with b >= u_c");
    if z_e + gamma >= z_c {
        Action::ExitEarly
    } else {
        Action::ContinueFull
    }
}

/// Causal rule: exit with the predicted probability given `z_e` only.
/// Draws one uniform only in states with a free choice.
pub fn cc_decide<R: Rng + ?Sized>(
    state: SystemState,
    z_e: f64,
    policy: &ThresholdPolicy,
    predictors: &PredictorMap,
    rng: &mut R,
) -> Action {
    if let Some(a) = forced(state.b, policy.u_exit, policy.u_continue) {
        return a;
    }
    let gamma = policy.gamma(&state).expect("policy covers every state with b >= u_c");
    let pred = predictors
        .get(gamma)
        .expect("a predictor is fitted for every policy threshold");
    let p = predict_exit_prob(pred, z_e);
    if rng.random::<f64>() < p {
        Action::ExitEarly
    } else {
        Action::ContinueFull
    }
}

/// Exit if the early head is right, continue if only the final head is
/// right and affordable, otherwise guess for free.
pub fn eao_decide(state: SystemState, sample: &ConfidenceSample, params: &EnergyParams) -> Action {
    if state.b < params.u_exit {
        Action::Discard
    } else if sample.correct_e {
        Action::ExitEarly
    } else if sample.correct_c && state.b >= params.u_continue {
        Action::ContinueFull
    } else {
        Action::FreeGuess
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Baseline {
    AlwaysExit,
    AlwaysContinue,
}

/// `fallback` lets always-continue exit early when it cannot afford `c`.
pub fn baseline_decide(kind: Baseline, state: SystemState, params: &EnergyParams, fallback: bool) -> Action {
    match kind {
        Baseline::AlwaysExit if state.b >= params.u_exit => Action::ExitEarly,
        Baseline::AlwaysContinue if state.b >= params.u_continue => Action::ContinueFull,
        Baseline::AlwaysContinue if fallback && state.b >= params.u_exit => Action::ExitEarly,
        _ => Action::Discard,
    }
}

/// A decision rule usable by the simulator.
pub trait Controller: Send + Sync {
    fn kind(&self) -> ControllerKind;

    fn decide(&self, state: SystemState, sample: &ConfidenceSample, rng: &mut SimRng) -> Action;
}

pub struct Oncc {
    pub policy: ThresholdPolicy,
}

impl Controller for Oncc {
    fn kind(&self) -> ControllerKind {
        ControllerKind::Oncc
    }

    fn decide(&self, state: SystemState, sample: &ConfidenceSample, _rng: &mut SimRng) -> Action {
        oncc_decide(state, sample.z_e, sample.z_c, &self.policy)
    }
}

pub struct Cc {
    pub policy: ThresholdPolicy,
    pub predictors: PredictorMap,
}

impl Controller for Cc {
    fn kind(&self) -> ControllerKind {
        ControllerKind::Cc
    }

    fn decide(&self, state: SystemState, sample: &ConfidenceSample, rng: &mut SimRng) -> Action {
        cc_decide(state, sample.z_e, &self.policy, &self.predictors, rng)
    }
}

pub struct Eao {
    pub params: EnergyParams,
}

impl Controller for Eao {
    fn kind(&self) -> ControllerKind {
        ControllerKind::Eao
    }

    fn decide(&self, state: SystemState, sample: &ConfidenceSample, _rng: &mut SimRng) -> Action {
        eao_decide(state, sample, &self.params)
    }
}

pub struct AlwaysExit {
    pub params: EnergyParams,
}

impl Controller for AlwaysExit {
    fn kind(&self) -> ControllerKind {
        ControllerKind::AlwaysExit
    }

    fn decide(&self, state: SystemState, _sample: &ConfidenceSample, _rng: &mut SimRng) -> Action {
        baseline_decide(Baseline::AlwaysExit, state, &self.params, false)
    }
}

pub struct AlwaysContinue {
    pub params: EnergyParams,
    pub fallback: bool,
}

impl Controller for AlwaysContinue {
    fn kind(&self) -> ControllerKind {
        ControllerKind::AlwaysContinue
    }

    fn decide(&self, state: SystemState, _sample: &ConfidenceSample, _rng: &mut SimRng) -> Action {
        baseline_decide(Baseline::AlwaysContinue, state, &self.params, self.fallback)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::Condition;
    use crate::rng_from_seed;
    use rand::RngCore;

    fn params() -> EnergyParams {
        EnergyParams::default()
    }

    fn sample(z_e: f64, z_c: f64, ce: bool, cc: bool) -> ConfidenceSample {
        ConfidenceSample {
            z_e,
            z_c,
            correct_e: ce,
            correct_c: cc,
        }
    }

    fn at(b: u32) -> SystemState {
        SystemState::new(b, Condition::Good)
    }

    #[test]
    fn oncc_examples() {
        let p = params();
        let pol = ThresholdPolicy::uniform(&p, 0.1, 0.5);
        assert_eq!(oncc_decide(at(10), 0.9, 0.95, &pol), Action::ExitEarly);
        let pol0 = ThresholdPolicy::uniform(&p, 0.0, 0.5);
        assert_eq!(oncc_decide(at(10), 0.9, 0.95, &pol0), Action::ContinueFull);
        assert_eq!(oncc_decide(at(0), 0.2, 0.99, &pol), Action::Discard);
        assert_eq!(oncc_decide(at(1), 0.2, 0.99, &pol), Action::ExitEarly);
    }

    #[test]
    fn cc_forced_rules_consume_no_randomness() {
        let p = params();
        let pol = ThresholdPolicy::uniform(&p, 0.1, 0.5);
        let preds = PredictorMap::from_predictors(vec![ExitPredictor {
            gamma: 0.1,
            prior1: 1.0,
            mu0: 0.0,
            var0: 1.0,
            mu1: 0.5,
            var1: 0.1,
        }]);
        let mut rng = rng_from_seed(1);
        let mut untouched = rng_from_seed(1);
        assert_eq!(cc_decide(at(0), 0.5, &pol, &preds, &mut rng), Action::Discard);
        assert_eq!(rng.next_u64(), untouched.next_u64());
        for _ in 0..100 {
            assert_eq!(cc_decide(at(20), 0.5, &pol, &preds, &mut rng), Action::ExitEarly);
        }
    }

    #[test]
    fn cc_exit_frequency_matches_posterior() {
        let p = params();
        let pol = ThresholdPolicy::uniform(&p, 0.1, 0.5);
        let pred = ExitPredictor {
            gamma: 0.1,
            prior1: 0.6,
            mu0: 0.4,
            var0: 0.02,
            mu1: 0.8,
            var1: 0.03,
        };
        let q = predict_exit_prob(&pred, 0.62);
        let preds = PredictorMap::from_predictors(vec![pred]);
        let mut rng = rng_from_seed(7);
        let n = 100_000;
        let exits = (0..n)
            .filter(|_| cc_decide(at(30), 0.62, &pol, &preds, &mut rng) == Action::ExitEarly)
            .count();
        let freq = exits as f64 / n as f64;
        let sigma = (q * (1.0 - q) / n as f64).sqrt();
        assert!((freq - q).abs() <= 3.0 * sigma, "freq {freq} q {q}");
    }

    #[test]
    fn eao_examples() {
        let p = params();
        assert_eq!(eao_decide(at(5), &sample(0.5, 0.5, true, false), &p), Action::ExitEarly);
        assert_eq!(eao_decide(at(1), &sample(0.5, 0.5, false, true), &p), Action::FreeGuess);
        assert_eq!(eao_decide(at(2), &sample(0.5, 0.5, false, true), &p), Action::ContinueFull);
        assert_eq!(eao_decide(at(50), &sample(0.5, 0.5, false, false), &p), Action::FreeGuess);
        assert_eq!(eao_decide(at(0), &sample(0.5, 0.5, true, true), &p), Action::Discard);
    }

    #[test]
    fn baseline_examples() {
        let p = params();
        assert_eq!(baseline_decide(Baseline::AlwaysContinue, at(1), &p, false), Action::Discard);
        assert_eq!(baseline_decide(Baseline::AlwaysContinue, at(1), &p, true), Action::ExitEarly);
        assert_eq!(baseline_decide(Baseline::AlwaysContinue, at(2), &p, false), Action::ContinueFull);
        assert_eq!(baseline_decide(Baseline::AlwaysExit, at(3), &p, false), Action::ExitEarly);
        assert_eq!(baseline_decide(Baseline::AlwaysExit, at(0), &p, false), Action::Discard);
    }

    #[test]
    fn kind_names_round_trip() {
        for k in ControllerKind::ALL {
            assert_eq!(ControllerKind::parse(k.name()), Some(k));
        }
        assert_eq!(ControllerKind::parse("nope"), None);
    }
}
