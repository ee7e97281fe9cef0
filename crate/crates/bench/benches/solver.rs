use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use ehexit_core::controllers::{Cc, Oncc};
use ehexit_core::mdp::{policy_iteration, MdpModel, DEFAULT_GRID_SIZE};
use ehexit_core::sim::run_episode;
use ehexit_core::trace::{build_gap_distribution, generate_synthetic, GeneratorConfig};
use ehexit_core::{rng_from_seed, Condition, EnergyParams, EpisodeConfig, PredictorMap, SystemState};

fn default_model() -> (EnergyParams, Vec<ehexit_core::ConfidenceSample>, MdpModel) {
    let params = EnergyParams::default();
    let samples = generate_synthetic(20_000, &GeneratorConfig::default(), &mut rng_from_seed(7)).unwrap();
    let model = MdpModel::from_samples(&params, &samples, DEFAULT_GRID_SIZE).unwrap();
    (params, samples, model)
}

fn solver(c: &mut Criterion) {
    let (params, samples, model) = default_model();
    let reference = SystemState::new(params.b_max, Condition::Good);
    c.bench_function("policy_iteration b_max=50 grid=257", |b| {
        b.iter(|| policy_iteration(&model, reference, 1000).unwrap())
    });
    c.bench_function("model from 20k samples", |b| {
        b.iter(|| MdpModel::from_samples(&params, &samples, DEFAULT_GRID_SIZE).unwrap())
    });
    c.bench_function("gap distribution 20k", |b| b.iter(|| build_gap_distribution(&samples).unwrap()));
}

fn episodes(c: &mut Criterion) {
    let (params, samples, model) = default_model();
    let sol = policy_iteration(&model, SystemState::new(params.b_max, Condition::Good), 1000).unwrap();
    let predictors = PredictorMap::fit(&sol.policy, &samples).unwrap();
    let cfg = EpisodeConfig::for_params(&params);
    let oncc = Oncc { policy: sol.policy.clone() };
    let cc = Cc { policy: sol.policy, predictors };
    c.bench_function("oncc episode T=1e4", |b| {
        b.iter_batched(
            || rng_from_seed(1),
            |mut rng| run_episode(&oncc, &samples, &params, &cfg, 10, &mut rng).unwrap(),
            BatchSize::SmallInput,
        )
    });
    c.bench_function("cc episode T=1e4", |b| {
        b.iter_batched(
            || rng_from_seed(1),
            |mut rng| run_episode(&cc, &samples, &params, &cfg, 10, &mut rng).unwrap(),
            BatchSize::SmallInput,
        )
    });
}

criterion_group!(benches, solver, episodes);
criterion_main!(benches);
