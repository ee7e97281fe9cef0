//! Episode simulation of a controller against the energy environment, with
//! service rate, accuracy and effective accuracy per episode and
//! normal-approximation confidence intervals across episodes.

mod output;

use rand::Rng;
use rayon::prelude::*;

use crate::controllers::{Action, Controller, ControllerKind};
use crate::energy::{step_battery, step_source, Condition, EnergyParams, SystemState};
use crate::error::{Error, Result};
use crate::trace::{ConfidenceSample, TraceSplits};
use crate::{rng_from_seed, SimRng};

pub use output::{
    read_summary_csv, write_episodes_csv, write_summary_csv, write_trajectory_csv, SummaryRow,
};

/// z-value of the two-sided 95% normal interval.
const Z95: f64 = 1.96;

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeConfig {
    pub horizon: usize,
    pub num_episodes: usize,
    pub b0: u32,
    pub h0: Condition,
    pub seed: u64,
    /// Worker threads for `run_suite`; 0 uses the global pool.
    pub threads: usize,
}

impl EpisodeConfig {
    /// Ten thousand slots, five episodes, full battery in a good state.
    pub fn for_params(params: &EnergyParams) -> Self {
        Self {
            horizon: 10_000,
            num_episodes: 5,
            b0: params.b_max,
            h0: Condition::Good,
            seed: 2024,
            threads: 0,
        }
    }

    pub fn violations(&self, params: &EnergyParams) -> Vec<String> {
        let mut out = Vec::new();
        if self.horizon == 0 {
            out.push("horizon must be at least 1".to_string());
        }
        if self.num_episodes == 0 {
            out.push("num_episodes must be at least 1".to_string());
        }
        if self.b0 > params.b_max {
            out.push(format!("b0 = {} exceeds b_max = {}", self.b0, params.b_max));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ActionCounts {
    pub discard: usize,
    pub exit: usize,
    pub cont: usize,
    pub guess: usize,
}

impl ActionCounts {
    fn record(&mut self, a: Action) {
        match a {
            Action::Discard => self.discard += 1,
            Action::ExitEarly => self.exit += 1,
            Action::ContinueFull => self.cont += 1,
            Action::FreeGuess => self.guess += 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeResult {
    /// Service rate: fraction of slots not discarded.
    pub tau: f64,
    /// Accuracy over served slots; 0 when nothing was served.
    pub rho: f64,
    /// Effective accuracy `rho * tau`.
    pub alpha: f64,
    pub served: usize,
    pub correct: usize,
    /// Set when no slot was served, so `rho` is undefined.
    pub no_service: bool,
    /// `B_0 ..= B_T`.
    pub battery: Vec<u32>,
    /// Energy consumed before slot `t`, for `t = 0..=T`.
    pub cumulative_energy: Vec<u64>,
    /// Energy harvested before slot `t`, for `t = 0..=T`.
    pub cumulative_harvest: Vec<u64>,
    pub counts: ActionCounts,
}

/// Runs one episode.
///
/// Each slot draws, in order: the source transition and arrival, the index
/// of the test sample (uniform with replacement), any randomness the
/// controller needs, and finally the outcome of a free guess.
pub fn run_episode(
    controller: &dyn Controller,
    trace: &[ConfidenceSample],
    params: &EnergyParams,
    cfg: &EpisodeConfig,
    num_classes: usize,
    rng: &mut SimRng,
) -> Result<EpisodeResult> {
    if trace.is_empty() {
        return Err(Error::Empty("simulation needs a non-empty test trace"));
    }
    let t_max = cfg.horizon;
    let guess_p = 1.0 / num_classes as f64;
    let mut b = cfg.b0.min(params.b_max);
    let mut h = cfg.h0;
    let mut battery = Vec::with_capacity(t_max + 1);
    let mut cumulative_energy = Vec::with_capacity(t_max + 1);
    let mut cumulative_harvest = Vec::with_capacity(t_max + 1);
    battery.push(b);
    cumulative_energy.push(0);
    cumulative_harvest.push(0);
    let (mut used, mut harvested) = (0u64, 0u64);
    let mut counts = ActionCounts::default();
    let (mut served, mut correct) = (0usize, 0usize);

    for _ in 0..t_max {
        let state = SystemState::new(b, h);
        let outcome = step_source(h, rng, params);
        let sample = &trace[rng.random_range(0..trace.len())];
        let action = controller.decide(state, sample, rng);
        let cost = action.cost(params);
        if cost > b {
            return Err(Error::InfeasibleAction { cost, battery: b });
        }
        let hit = match action {
            Action::Discard => false,
            Action::ExitEarly => sample.correct_e,
            Action::ContinueFull => sample.correct_c,
            Action::FreeGuess => rng.random::<f64>() < guess_p,
        };
        if action.is_served() {
            served += 1;
            correct += hit as usize;
        }
        counts.record(action);
        b = step_battery(b, cost, outcome.w, params)?;
        h = outcome.h_next;
        used += cost as u64;
        harvested += outcome.w as u64;
        battery.push(b);
        cumulative_energy.push(used);
        cumulative_harvest.push(harvested);
    }

    let tau = served as f64 / t_max as f64;
    let rho = if served > 0 { correct as f64 / served as f64 } else { 0.0 };
    Ok(EpisodeResult {
        tau,
        rho,
        alpha: rho * tau,
        served,
        correct,
        no_service: served == 0,
        battery,
        cumulative_energy,
        cumulative_harvest,
        counts,
    })
}

/// Consumed energy with the `u_c t`, `u_e t` and `eps t` reference lines.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergySeries {
    pub consumed: Vec<f64>,
    pub continue_line: Vec<f64>,
    pub exit_line: Vec<f64>,
    pub harvest_line: Vec<f64>,
}

pub fn cumulative_energy_series(result: &EpisodeResult, params: &EnergyParams, energy_rate: f64) -> EnergySeries {
    let ts = 0..result.cumulative_energy.len();
    EnergySeries {
        consumed: result.cumulative_energy.iter().map(|&e| e as f64).collect(),
        continue_line: ts.clone().map(|t| params.u_continue as f64 * t as f64).collect(),
        exit_line: ts.clone().map(|t| params.u_exit as f64 * t as f64).collect(),
        harvest_line: ts.map(|t| energy_rate * t as f64).collect(),
    }
}

/// Mean and 95% half-width across episodes.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub half_width: f64,
}

impl Estimate {
    pub fn from_values(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return Self::default();
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        if n == 1 {
            return Self { mean, half_width: 0.0 };
        }
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        Self {
            mean,
            half_width: Z95 * var.sqrt() / (n as f64).sqrt(),
        }
    }
}

/// Scalar outcome of one episode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeSummary {
    pub tau: f64,
    pub rho: f64,
    pub alpha: f64,
    pub served: usize,
    pub correct: usize,
    pub no_service: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateResult {
    pub kind: ControllerKind,
    pub episodes: Vec<EpisodeSummary>,
    pub tau: Estimate,
    pub rho: Estimate,
    pub alpha: Estimate,
    /// Per-slot battery level across episodes, `t = 0..=T`.
    pub battery: Vec<Estimate>,
    /// Per-slot cumulative consumed energy across episodes, `t = 0..=T`.
    pub cumulative_energy: Vec<Estimate>,
}

impl AggregateResult {
    pub fn from_episodes(kind: ControllerKind, results: &[EpisodeResult]) -> Self {
        let col = |f: fn(&EpisodeResult) -> f64| Estimate::from_values(&results.iter().map(f).collect::<Vec<_>>());
        let len = results.first().map_or(0, |r| r.battery.len());
        let per_slot = |get: &dyn Fn(&EpisodeResult, usize) -> f64| {
            (0..len)
                .map(|t| Estimate::from_values(&results.iter().map(|r| get(r, t)).collect::<Vec<_>>()))
                .collect::<Vec<_>>()
        };
        Self {
            kind,
            episodes: results
                .iter()
                .map(|r| EpisodeSummary {
                    tau: r.tau,
                    rho: r.rho,
                    alpha: r.alpha,
                    served: r.served,
                    correct: r.correct,
                    no_service: r.no_service,
                })
                .collect(),
            tau: col(|r| r.tau),
            rho: col(|r| r.rho),
            alpha: col(|r| r.alpha),
            battery: per_slot(&|r, t| r.battery[t] as f64),
            cumulative_energy: per_slot(&|r, t| r.cumulative_energy[t] as f64),
        }
    }

    /// Mean consumed energy per slot over the whole horizon.
    pub fn energy_rate(&self) -> f64 {
        let horizon = self.cumulative_energy.len().saturating_sub(1).max(1);
        self.cumulative_energy.last().map_or(0.0, |e| e.mean) / horizon as f64
    }
}

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of one episode: `mix(mix(mix(master) ^ controller) ^ episode)`.
pub fn episode_seed(master: u64, kind: ControllerKind, episode: usize) -> u64 {
    mix(mix(mix(master) ^ kind.id()) ^ episode as u64)
}

/// Runs `num_episodes` episodes of every controller on the test split.
/// Results come back in the order of `controllers`.
pub fn run_suite(
    controllers: &[&dyn Controller],
    splits: &TraceSplits,
    params: &EnergyParams,
    cfg: &EpisodeConfig,
    num_classes: usize,
) -> Result<Vec<AggregateResult>> {
    let jobs: Vec<(usize, usize)> = (0..controllers.len())
        .flat_map(|c| (0..cfg.num_episodes).map(move |e| (c, e)))
        .collect();
    let run = || {
        jobs.par_iter()
            .map(|&(c, e)| {
                let ctrl = controllers[c];
                let mut rng = rng_from_seed(episode_seed(cfg.seed, ctrl.kind(), e));
                run_episode(ctrl, &splits.test, params, cfg, num_classes, &mut rng)
            })
            .collect::<Result<Vec<_>>>()
    };
    let results = if cfg.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.threads)
            .build()
            .map_err(|e| Error::InvalidParams(e.to_string()))?
            .install(run)?
    } else {
        run()?
    };
    Ok(results
        .chunks(cfg.num_episodes)
        .zip(controllers)
        .map(|(eps, ctrl)| AggregateResult::from_episodes(ctrl.kind(), eps))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controllers::{AlwaysContinue, AlwaysExit, Eao};
    use crate::energy::average_energy_rate;
    use crate::trace::{generate_synthetic, GeneratorConfig};

    fn trace(n: usize) -> Vec<ConfidenceSample> {
        generate_synthetic(n, &GeneratorConfig::default(), &mut rng_from_seed(99)).unwrap()
    }

    #[test]
    fn always_exit_serves_every_slot() {
        let p = EnergyParams::default();
        let cfg = EpisodeConfig::for_params(&p);
        let ctrl = AlwaysExit { params: p.clone() };
        let r = run_episode(&ctrl, &trace(2000), &p, &cfg, 10, &mut rng_from_seed(1)).unwrap();
        assert_eq!(r.tau, 1.0);
        assert_eq!(r.counts.discard, 0);
        let series = cumulative_energy_series(&r, &p, average_energy_rate(&p).unwrap());
        assert_eq!(series.consumed, series.exit_line);
        assert!((r.alpha - r.rho * r.tau).abs() < 1e-12);
    }

    #[test]
    fn empty_battery_single_slot() {
        let p = EnergyParams::default();
        let cfg = EpisodeConfig {
            horizon: 1,
            b0: 0,
            ..EpisodeConfig::for_params(&p)
        };
        let ctrl = AlwaysExit { params: p.clone() };
        let r = run_episode(&ctrl, &trace(10), &p, &cfg, 10, &mut rng_from_seed(1)).unwrap();
        assert_eq!(r.tau, 0.0);
        assert_eq!(r.rho, 0.0);
        assert!(r.no_service);
    }

    #[test]
    fn always_continue_renewal_rate() {
        let p = EnergyParams::default();
        let cfg = EpisodeConfig::for_params(&p);
        let ctrl = AlwaysContinue {
            params: p.clone(),
            fallback: false,
        };
        let r = run_episode(&ctrl, &trace(2000), &p, &cfg, 10, &mut rng_from_seed(5)).unwrap();
        assert!((0.58..=0.68).contains(&r.tau), "tau = {}", r.tau);
    }

    #[test]
    fn infeasible_action_aborts() {
        struct Greedy;
        impl Controller for Greedy {
            fn kind(&self) -> ControllerKind {
                ControllerKind::AlwaysContinue
            }
            fn decide(&self, _: SystemState, _: &ConfidenceSample, _: &mut SimRng) -> Action {
                Action::ContinueFull
            }
        }
        let p = EnergyParams::default();
        let cfg = EpisodeConfig {
            b0: 0,
            ..EpisodeConfig::for_params(&p)
        };
        let err = run_episode(&Greedy, &trace(10), &p, &cfg, 10, &mut rng_from_seed(1)).unwrap_err();
        assert!(matches!(err, Error::InfeasibleAction { cost: 2, battery: 0 }));
    }

    #[test]
    fn suite_is_deterministic_and_single_episode_has_no_width() {
        let p = EnergyParams::default();
        let splits = TraceSplits {
            test: trace(1000),
            ..Default::default()
        };
        let cfg = EpisodeConfig {
            horizon: 500,
            num_episodes: 1,
            ..EpisodeConfig::for_params(&p)
        };
        let eao = Eao { params: p.clone() };
        let ae = AlwaysExit { params: p.clone() };
        let ctrls: Vec<&dyn Controller> = vec![&eao, &ae];
        let a = run_suite(&ctrls, &splits, &p, &cfg, 10).unwrap();
        let b = run_suite(&ctrls, &splits, &p, &EpisodeConfig { threads: 2, ..cfg.clone() }, 10).unwrap();
        assert_eq!(a, b);
        assert_eq!(a[0].kind, ControllerKind::Eao);
        assert_eq!(a[0].alpha.half_width, 0.0);
        assert!(a[0].cumulative_energy.iter().all(|e| e.half_width == 0.0));
    }

    #[test]
    fn estimate_half_width() {
        let e = Estimate::from_values(&[1.0, 2.0, 3.0, 4.0, 5.0]);
        assert_eq!(e.mean, 3.0);
        let sd = (2.5f64).sqrt();
        assert!((e.half_width - 1.96 * sd / 5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn seeds_differ_across_controllers_and_episodes() {
        let a = episode_seed(1, ControllerKind::Cc, 0);
        assert_ne!(a, episode_seed(1, ControllerKind::Oncc, 0));
        assert_ne!(a, episode_seed(1, ControllerKind::Cc, 1));
        assert_ne!(a, episode_seed(2, ControllerKind::Cc, 0));
    }
}
