#![allow(dead_code)]

use ehexit_core::controllers::{AlwaysContinue, AlwaysExit, Cc, Eao, Oncc};
use ehexit_core::energy::average_energy_rate;
use ehexit_core::mdp::{policy_iteration, MdpModel, PiSolution, DEFAULT_GRID_SIZE, DEFAULT_MAX_ITERATIONS};
use ehexit_core::sim::run_suite;
use ehexit_core::trace::{generate_synthetic, split, GeneratorConfig};
use ehexit_core::{
    rng_from_seed, AggregateResult, Condition, Controller, ControllerKind, EnergyParams, EpisodeConfig,
    PredictorMap, SystemState, TraceSplits,
};

/// Everything produced by the default experiment: default energy settings,
/// 5e4 synthetic samples split 40/40/20, T = 1e4, five episodes.
pub struct DefaultRun {
    pub params: EnergyParams,
    pub epsilon: f64,
    pub splits: TraceSplits,
    pub solution: PiSolution,
    pub predictors: PredictorMap,
    pub results: Vec<AggregateResult>,
}

impl DefaultRun {
    pub fn result(&self, kind: ControllerKind) -> &AggregateResult {
        self.results.iter().find(|r| r.kind == kind).unwrap()
    }
}

pub fn default_params() -> EnergyParams {
    EnergyParams::default()
}

pub fn default_run(sim_seed: u64) -> DefaultRun {
    let params = default_params();
    let epsilon = average_energy_rate(&params).unwrap();
    let gen = GeneratorConfig::default();
    let samples = generate_synthetic(50_000, &gen, &mut rng_from_seed(7)).unwrap();
    let splits = split(&samples, (0.4, 0.4, 0.2), &mut rng_from_seed(8)).unwrap();
    let model = MdpModel::from_samples(&params, &splits.est, DEFAULT_GRID_SIZE).unwrap();
    let solution = policy_iteration(
        &model,
        SystemState::new(params.b_max, Condition::Good),
        DEFAULT_MAX_ITERATIONS,
    )
    .unwrap();
    let predictors = PredictorMap::fit(&solution.policy, &splits.nb).unwrap();

    let ac = AlwaysContinue { params: params.clone(), fallback: false };
    let ae = AlwaysExit { params: params.clone() };
    let eao = Eao { params: params.clone() };
    let oncc = Oncc { policy: solution.policy.clone() };
    let cc = Cc { policy: solution.policy.clone(), predictors: predictors.clone() };
    let ctrls: Vec<&dyn Controller> = vec![&ac, &ae, &eao, &oncc, &cc];
    let cfg = EpisodeConfig { seed: sim_seed, ..EpisodeConfig::for_params(&params) };
    let results = run_suite(&ctrls, &splits, &params, &cfg, gen.num_classes).unwrap();
    DefaultRun { params, epsilon, splits, solution, predictors, results }
}
