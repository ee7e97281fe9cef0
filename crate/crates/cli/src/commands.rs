use std::path::{Path, PathBuf};

use ehexit_core::controllers::{AlwaysContinue, AlwaysExit, Cc, Eao, Oncc};
use ehexit_core::energy::average_energy_rate;
use ehexit_core::mdp::{brute_force_oracle, policy_iteration, MdpModel};
use ehexit_core::sim::{run_suite, write_episodes_csv, write_summary_csv, write_trajectory_csv};
use ehexit_core::trace::{
    calibrate_records, emit_csv, generate_synthetic, ingest_csv, ingest_logits_csv, mean_nll, split,
    temperature_scale, Head,
};
use ehexit_core::{
    rng_from_seed, Condition, ConfidenceSample, Controller, ControllerKind, Error, PredictorMap, SystemState,
    ThresholdPolicy, TraceSplits,
};

use crate::config::TraceSource;
use crate::*;

/// Agreement required between policy iteration and the exhaustive oracle.
const ORACLE_TOL: f64 = 1e-9;

fn artifact(cfg: &ExperimentConfig, name: &str, step: &'static str) -> Result<PathBuf, CliError> {
    let path = cfg.output.dir.join(name);
    if path.is_file() {
        Ok(path)
    } else {
        Err(CliError::MissingArtifact { path, step })
    }
}

fn out_path(cfg: &ExperimentConfig, name: &str) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(&cfg.output.dir)?;
    Ok(cfg.output.dir.join(name))
}

fn mean(samples: &[ConfidenceSample], f: impl Fn(&ConfidenceSample) -> f64) -> f64 {
    samples.iter().map(f).sum::<f64>() / samples.len() as f64
}

fn bit(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

/// Produces the three trace splits.
pub fn gen_trace(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let t = &cfg.trace;
    let mut rng = rng_from_seed(t.seed);
    let samples = match t.source {
        TraceSource::Synthetic => generate_synthetic(t.n, &cfg.generator(), &mut rng)?,
        TraceSource::Csv => ingest_csv(t.csv_path.as_ref().expect("validated"), t.num_classes)?,
        TraceSource::Logits => ingest_csv(artifact(cfg, TRACE_CALIBRATED, "calibrate")?, t.num_classes)?,
    };
    let splits = split(&samples, (t.split[0], t.split[1], t.split[2]), &mut rng)?;
    for (name, part) in [(TRACE_EST, &splits.est), (TRACE_NB, &splits.nb), (TRACE_TEST, &splits.test)] {
        emit_csv(out_path(cfg, name)?, part)?;
    }
    println!(
        "samples {} (est {}, nb {}, test {})",
        samples.len(),
        splits.est.len(),
        splits.nb.len(),
        splits.test.len()
    );
    println!("early accuracy {:.4}", mean(&samples, |s| bit(s.correct_e)));
    println!("final accuracy {:.4}", mean(&samples, |s| bit(s.correct_c)));
    println!("mean gap z_c - z_e {:.4}", mean(&samples, ConfidenceSample::gap));
    Ok(())
}

/// Temperature-scales both heads of the configured logit file.
pub fn calibrate(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let path = cfg
        .trace
        .logits_path
        .as_ref()
        .ok_or_else(|| CliError::Config(vec!["calibrate needs trace.logits_path".into()]))?;
    let records = ingest_logits_csv(path)?;
    let t_e = temperature_scale(&records, Head::Early)?;
    let t_c = temperature_scale(&records, Head::Final)?;
    let samples = calibrate_records(&records, t_e, t_c);
    emit_csv(out_path(cfg, TRACE_CALIBRATED)?, &samples)?;
    for (label, head, t) in [("early", Head::Early, t_e), ("final", Head::Final, t_c)] {
        println!(
            "{label}: T = {t:.4}, nll {:.4} -> {:.4}",
            mean_nll(&records, head, 1.0),
            mean_nll(&records, head, t)
        );
    }
    println!("wrote {} samples", samples.len());
    Ok(())
}

/// Solves for the threshold policy on the estimation split and fits the
/// exit predictors on the naive Bayes split.
pub fn fit(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let est = ingest_csv(artifact(cfg, TRACE_EST, "gen-trace")?, cfg.trace.num_classes)?;
    let nb = ingest_csv(artifact(cfg, TRACE_NB, "gen-trace")?, cfg.trace.num_classes)?;
    let params = cfg.energy_params();
    let model = MdpModel::from_samples(&params, &est, cfg.solver.grid_size)?;
    let sol = policy_iteration(&model, cfg.reference_state(), cfg.solver.max_iterations).map_err(|e| match e {
        Error::Unichain | Error::IterationLimit(_) => CliError::Numerical(format!("{e} for {params:?}")),
        e => e.into(),
    })?;
    println!("gain {:.9} after {} iterations", sol.gain, sol.iterations);
    if cfg.solver.check_oracle {
        let oracle = brute_force_oracle(&model)?;
        let diff = (oracle.gain - sol.gain).abs();
        println!("oracle gain {:.9} (|diff| = {diff:.2e})", oracle.gain);
        if diff > ORACLE_TOL {
            return Err(CliError::Numerical(format!(
                "policy iteration gain {} differs from oracle gain {} by {diff:.2e}",
                sol.gain, oracle.gain
            )));
        }
    }
    let predictors = PredictorMap::fit(&sol.policy, &nb)?;
    sol.policy.write_csv(out_path(cfg, POLICY)?)?;
    predictors.write_csv(out_path(cfg, PREDICTOR)?)?;

    println!("{:>5} {:>10} {:>10}", "b", "eta(b,G)", "eta(b,B)");
    for b in 0..=params.b_max {
        let eta = |h| sol.policy.exit_prob(&SystemState::new(b, h));
        println!("{b:>5} {:>10.6} {:>10.6}", eta(Condition::Good), eta(Condition::Bad));
    }
    Ok(())
}

fn load_policy(cfg: &ExperimentConfig) -> Result<ThresholdPolicy, CliError> {
    Ok(ThresholdPolicy::read_csv(artifact(cfg, POLICY, "fit")?, &cfg.energy_params())?)
}

/// Runs every enabled controller on the test split.
pub fn simulate(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let test = ingest_csv(artifact(cfg, TRACE_TEST, "gen-trace")?, cfg.trace.num_classes)?;
    let params = cfg.energy_params();
    let kinds = cfg.enabled();
    let mut ctrls: Vec<Box<dyn Controller>> = Vec::new();
    for kind in &kinds {
        ctrls.push(match kind {
            ControllerKind::AlwaysContinue => Box::new(AlwaysContinue {
                params: params.clone(),
                fallback: cfg.controllers.always_continue_fallback,
            }),
            ControllerKind::AlwaysExit => Box::new(AlwaysExit { params: params.clone() }),
            ControllerKind::Eao => Box::new(Eao { params: params.clone() }),
            ControllerKind::Oncc => Box::new(Oncc { policy: load_policy(cfg)? }),
            ControllerKind::Cc => {
                let policy = load_policy(cfg)?;
                let predictors = PredictorMap::read_csv(artifact(cfg, PREDICTOR, "fit")?)?;
                if !predictors.covers(&policy) {
                    return Err(CliError::MissingArtifact {
                        path: cfg.output.dir.join(PREDICTOR),
                        step: "fit",
                    });
                }
                Box::new(Cc { policy, predictors })
            }
        });
    }
    let refs: Vec<&dyn Controller> = ctrls.iter().map(|c| c.as_ref()).collect();
    let splits = TraceSplits { test, ..Default::default() };
    let results = run_suite(&refs, &splits, &params, &cfg.episode_config(), cfg.trace.num_classes)?;

    write_summary_csv(out_path(cfg, SUMMARY)?, &results)?;
    let epsilon = average_energy_rate(&params)?;
    println!("{:<16} {:>8} {:>8} {:>8} {:>10}", "controller", "alpha", "rho", "tau", "energy/T");
    for r in &results {
        let name = r.kind.name();
        write_episodes_csv(out_path(cfg, &episodes_file(name))?, r)?;
        write_trajectory_csv(out_path(cfg, &trajectory_file(name))?, r)?;
        println!(
            "{name:<16} {:>8.4} {:>8.4} {:>8.4} {:>10.4}",
            r.alpha.mean,
            r.rho.mean,
            r.tau.mean,
            r.energy_rate()
        );
    }
    println!("incoming energy rate {epsilon:.4}");
    Ok(())
}

/// Writes `report.md` from the simulation outputs and prints it.
pub fn report(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let summary = artifact(cfg, SUMMARY, "simulate")?;
    let text = report::render(cfg, &summary)?;
    std::fs::write(out_path(cfg, REPORT)?, &text)?;
    print!("{text}");
    Ok(())
}

/// The whole pipeline; `calibrate` runs only for logit sources.
pub fn run_all(cfg: &ExperimentConfig) -> Result<(), CliError> {
    if cfg.trace.source == TraceSource::Logits {
        calibrate(cfg)?;
    }
    gen_trace(cfg)?;
    fit(cfg)?;
    simulate(cfg)?;
    report(cfg)
}

pub fn load(path: &Path) -> Result<ExperimentConfig, CliError> {
    ExperimentConfig::load(path)
}
