//! Experiment configuration file. Every key is optional; missing keys take
//! the defaults below.

use std::path::{Path, PathBuf};

use ehexit_core::mdp::{DEFAULT_GRID_SIZE, DEFAULT_MAX_ITERATIONS, ORACLE_LIMIT};
use ehexit_core::{Condition, ControllerKind, EnergyParams, EpisodeConfig, GeneratorConfig, SystemState};
use serde::Deserialize;

use crate::CliError;

pub const ENV_OUTPUT_DIR: &str = "EHEXIT_OUTPUT_DIR";
pub const ENV_SEED: &str = "EHEXIT_SEED";

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnergySection {
    pub p_good: f64,
    pub p_bad: f64,
    /// Arrival probabilities of 0, 1 and 2 quanta in the good state.
    pub lambda: [f64; 3],
    pub b_max: u32,
    pub u_exit: u32,
    pub u_continue: u32,
}

impl Default for EnergySection {
    fn default() -> Self {
        let p = EnergyParams::default();
        Self {
            p_good: p.p_good,
            p_bad: p.p_bad,
            lambda: p.lambda,
            b_max: p.b_max,
            u_exit: p.u_exit,
            u_continue: p.u_continue,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TraceSource {
    Synthetic,
    Csv,
    /// Confidences produced by `calibrate` from a logit file.
    Logits,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorSection {
    pub acc_early: f64,
    pub acc_final: f64,
    pub spread: f64,
    pub noise: f64,
    pub overthinking: f64,
}

impl Default for GeneratorSection {
    fn default() -> Self {
        let g = GeneratorConfig::default();
        Self {
            acc_early: g.acc_early,
            acc_final: g.acc_final,
            spread: g.spread,
            noise: g.noise,
            overthinking: g.overthinking,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TraceSection {
    pub source: TraceSource,
    pub num_classes: usize,
    /// Number of synthetic samples.
    pub n: usize,
    /// Estimation, naive Bayes and test fractions.
    pub split: [f64; 3],
    pub seed: u64,
    pub csv_path: Option<PathBuf>,
    pub logits_path: Option<PathBuf>,
    pub generator: GeneratorSection,
}

impl Default for TraceSection {
    fn default() -> Self {
        Self {
            source: TraceSource::Synthetic,
            num_classes: 10,
            n: 50_000,
            split: [0.4, 0.4, 0.2],
            seed: 7,
            csv_path: None,
            logits_path: None,
            generator: GeneratorSection::default(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    pub grid_size: usize,
    /// Battery level of the reference state; defaults to `b_max`.
    pub reference_b: Option<u32>,
    pub reference_h: String,
    pub max_iterations: usize,
    /// Cross-check policy iteration against exhaustive enumeration.
    pub check_oracle: bool,
}

impl Default for SolverSection {
    fn default() -> Self {
        Self {
            grid_size: DEFAULT_GRID_SIZE,
            reference_b: None,
            reference_h: "G".into(),
            max_iterations: DEFAULT_MAX_ITERATIONS,
            check_oracle: false,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControllersSection {
    pub enabled: Vec<String>,
    /// Let always-continue exit early when it cannot afford to continue.
    pub always_continue_fallback: bool,
    /// Probability that the two correctness bits of a synthetic sample
    /// share one uniform draw.
    pub correctness_coupling: f64,
}

impl Default for ControllersSection {
    fn default() -> Self {
        Self {
            enabled: ControllerKind::ALL.iter().map(|k| k.name().to_string()).collect(),
            always_continue_fallback: false,
            correctness_coupling: 0.0,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSection {
    pub horizon: usize,
    pub episodes: usize,
    /// Initial battery; defaults to `b_max`.
    pub b0: Option<u32>,
    pub h0: String,
    pub seed: u64,
    /// Worker threads for episodes; 0 lets rayon decide.
    pub threads: usize,
}

impl Default for SimSection {
    fn default() -> Self {
        Self {
            horizon: 10_000,
            episodes: 5,
            b0: None,
            h0: "G".into(),
            seed: 2024,
            threads: 0,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: PathBuf::from("out") }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub energy: EnergySection,
    pub trace: TraceSection,
    pub solver: SolverSection,
    pub controllers: ControllersSection,
    pub sim: SimSection,
    pub output: OutputSection,
}

impl ExperimentConfig {
    /// Reads, applies environment overrides, resolves relative paths against
    /// the config file's directory, and validates.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(vec![format!("cannot read {}: {e}", path.display())]))?;
        let mut cfg: ExperimentConfig =
            toml::from_str(&text).map_err(|e| CliError::Config(vec![format!("{}: {e}", path.display())]))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.trace.csv_path, &mut cfg.trace.logits_path].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if cfg.output.dir.is_relative() {
            cfg.output.dir = base.join(&cfg.output.dir);
        }
        cfg.apply_env()?;
        let v = cfg.violations();
        if v.is_empty() {
            Ok(cfg)
        } else {
            Err(CliError::Config(v))
        }
    }

    /// `EHEXIT_OUTPUT_DIR` replaces the output directory; `EHEXIT_SEED`
    /// replaces both the trace seed and the simulation master seed.
    fn apply_env(&mut self) -> Result<(), CliError> {
        if let Some(dir) = std::env::var_os(ENV_OUTPUT_DIR) {
            self.output.dir = PathBuf::from(dir);
        }
        if let Ok(s) = std::env::var(ENV_SEED) {
            let seed = s
                .trim()
                .parse::<u64>()
                .map_err(|e| CliError::Config(vec![format!("{ENV_SEED} = {s:?}: {e}")]))?;
            self.trace.seed = seed;
            self.sim.seed = seed;
        }
        Ok(())
    }

    pub fn energy_params(&self) -> EnergyParams {
        let e = &self.energy;
        EnergyParams {
            p_good: e.p_good,
            p_bad: e.p_bad,
            lambda: e.lambda,
            b_max: e.b_max,
            u_exit: e.u_exit,
            u_continue: e.u_continue,
        }
    }

    pub fn generator(&self) -> GeneratorConfig {
        let g = &self.trace.generator;
        GeneratorConfig {
            num_classes: self.trace.num_classes,
            acc_early: g.acc_early,
            acc_final: g.acc_final,
            spread: g.spread,
            noise: g.noise,
            overthinking: g.overthinking,
            coupling: self.controllers.correctness_coupling,
        }
    }

    pub fn reference_state(&self) -> SystemState {
        SystemState::new(
            self.solver.reference_b.unwrap_or(self.energy.b_max),
            Condition::from_symbol(&self.solver.reference_h).unwrap_or(Condition::Good),
        )
    }

    pub fn episode_config(&self) -> EpisodeConfig {
        EpisodeConfig {
            horizon: self.sim.horizon,
            num_episodes: self.sim.episodes,
            b0: self.sim.b0.unwrap_or(self.energy.b_max),
            h0: Condition::from_symbol(&self.sim.h0).unwrap_or(Condition::Good),
            seed: self.sim.seed,
            threads: self.sim.threads,
        }
    }

    /// Enabled controllers in configuration order. Only meaningful after
    /// validation.
    pub fn enabled(&self) -> Vec<ControllerKind> {
        self.controllers.enabled.iter().filter_map(|s| ControllerKind::parse(s)).collect()
    }

    /// Every violated constraint, prefixed with its key.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let params = self.energy_params();
        out.extend(params.violations().into_iter().map(|m| format!("energy: {m}")));

        let t = &self.trace;
        out.extend(self.generator().violations().into_iter().map(|m| format!("trace.generator: {m}")));
        if t.split.iter().any(|f| !(0.0..=1.0).contains(f)) || (t.split.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            out.push(format!("trace.split = {:?} must be three fractions in [0, 1] summing to 1", t.split));
        }
        match t.source {
            TraceSource::Synthetic => {
                if t.split.iter().any(|f| (t.n as f64 * f) < 1.0) {
                    out.push(format!("trace.n = {} leaves an empty split at {:?}", t.n, t.split));
                }
            }
            TraceSource::Csv => match &t.csv_path {
                None => out.push("trace.csv_path is required when trace.source = \"csv\"".into()),
                Some(p) if !p.is_file() => out.push(format!("trace.csv_path {} does not exist", p.display())),
                _ => {}
            },
            TraceSource::Logits => match &t.logits_path {
                None => out.push("trace.logits_path is required when trace.source = \"logits\"".into()),
                Some(p) if !p.is_file() => out.push(format!("trace.logits_path {} does not exist", p.display())),
                _ => {}
            },
        }

        let s = &self.solver;
        if s.grid_size == 0 {
            out.push("solver.grid_size must be at least 1".into());
        }
        if s.max_iterations == 0 {
            out.push("solver.max_iterations must be at least 1".into());
        }
        if let Some(b) = s.reference_b {
            if b > self.energy.b_max {
                out.push(format!("solver.reference_b = {b} exceeds energy.b_max = {}", self.energy.b_max));
            }
        }
        if Condition::from_symbol(&s.reference_h).is_none() {
            out.push(format!("solver.reference_h = {:?} must be \"G\" or \"B\"", s.reference_h));
        }
        if s.check_oracle && self.energy.u_continue <= self.energy.b_max {
            let states = 2 * (self.energy.b_max - self.energy.u_continue + 1);
            let count = (s.grid_size.max(1) as u128).checked_pow(states).unwrap_or(u128::MAX);
            if count > ORACLE_LIMIT {
                out.push(format!(
                    "solver.check_oracle needs grid_size^{states} <= {ORACLE_LIMIT} policies, got {count}"
                ));
            }
        }

        let c = &self.controllers;
        if c.enabled.is_empty() {
            out.push("controllers.enabled must name at least one controller".into());
        }
        for (i, name) in c.enabled.iter().enumerate() {
            if ControllerKind::parse(name).is_none() {
                let known: Vec<_> = ControllerKind::ALL.iter().map(|k| k.name()).collect();
                out.push(format!("controllers.enabled: unknown controller {name:?} (known: {})", known.join(", ")));
            } else if c.enabled[..i].contains(name) {
                out.push(format!("controllers.enabled: {name:?} listed twice"));
            }
        }

        out.extend(
            self.episode_config()
                .violations(&params)
                .into_iter()
                .map(|m| format!("sim: {m}")),
        );
        if Condition::from_symbol(&self.sim.h0).is_none() {
            out.push(format!("sim.h0 = {:?} must be \"G\" or \"B\"", self.sim.h0));
        }
        if self.output.dir.as_os_str().is_empty() {
            out.push("output.dir must not be empty".into());
        }
        out
    }
}
