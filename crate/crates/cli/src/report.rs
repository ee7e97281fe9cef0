use std::fmt::Write as _;
use std::path::Path;

use ehexit_core::energy::average_energy_rate;
use ehexit_core::sim::{read_summary_csv, SummaryRow};
use ehexit_core::ControllerKind;

use crate::{episodes_file, CliError, ExperimentConfig};

/// CSV values carry nine decimals, so a product of two of them is only good
/// to about this much.
const IDENTITY_TOL: f64 = 1e-6;

fn find(rows: &[SummaryRow], kind: ControllerKind) -> Option<&SummaryRow> {
    rows.iter().find(|r| r.controller == kind.name())
}

fn relative(new: f64, old: f64) -> String {
    if old == 0.0 {
        "n/a".into()
    } else {
        format!("{:+.1}%", 100.0 * (new - old) / old)
    }
}

/// Episode rows whose alpha differs from rho * tau.
fn audit(path: &Path) -> std::io::Result<Vec<String>> {
    let text = std::fs::read_to_string(path)?;
    let mut bad = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        let f: Vec<f64> = line.split(',').filter_map(|x| x.trim().parse().ok()).collect();
        if f.len() < 4 {
            bad.push(format!("line {}: unreadable row", i + 1));
            continue;
        }
        let (tau, rho, alpha) = (f[1], f[2], f[3]);
        if (alpha - rho * tau).abs() > IDENTITY_TOL {
            bad.push(format!("line {}: alpha {alpha} but rho * tau = {}", i + 1, rho * tau));
        }
    }
    Ok(bad)
}

pub(crate) fn render(cfg: &ExperimentConfig, summary: &Path) -> Result<String, CliError> {
    let rows = read_summary_csv(summary)?;
    let p = cfg.energy_params();
    let e = cfg.episode_config();
    let mut s = String::new();
    let _ = writeln!(s, "# Early-exit controller comparison\n");
    let _ = writeln!(
        s,
        "Energy source p_G = {}, p_B = {}, lambda = {:?}, b_max = {}, u(e) = {}, u(c) = {}; incoming rate {:.4} quanta per slot.",
        p.p_good,
        p.p_bad,
        p.lambda,
        p.b_max,
        p.u_exit,
        p.u_continue,
        average_energy_rate(&p)?
    );
    let _ = writeln!(
        s,
        "Horizon {} slots, {} episodes, master seed {}. Intervals are 95% normal approximations.\n",
        e.horizon, e.num_episodes, e.seed
    );

    let _ = writeln!(s, "| controller | alpha | rho | tau |");
    let _ = writeln!(s, "|---|---|---|---|");
    for r in &rows {
        let _ = writeln!(
            s,
            "| {} | {:.4} ± {:.4} | {:.4} ± {:.4} | {:.4} ± {:.4} |",
            r.controller, r.alpha.mean, r.alpha.half_width, r.rho.mean, r.rho.half_width, r.tau.mean, r.tau.half_width
        );
    }

    if let Some(cc) = find(&rows, ControllerKind::Cc) {
        let mut lines = Vec::new();
        if let Some(ae) = find(&rows, ControllerKind::AlwaysExit) {
            lines.push(format!("- CC accuracy vs always_exit: {}", relative(cc.rho.mean, ae.rho.mean)));
        }
        if let Some(ac) = find(&rows, ControllerKind::AlwaysContinue) {
            lines.push(format!(
                "- CC effective accuracy vs always_continue: {}",
                relative(cc.alpha.mean, ac.alpha.mean)
            ));
            lines.push(format!(
                "- CC service rate vs always_continue: {}",
                relative(cc.tau.mean, ac.tau.mean)
            ));
        }
        if !lines.is_empty() {
            let _ = writeln!(s, "\n## Relative improvement of CC\n");
            for l in lines {
                let _ = writeln!(s, "{l}");
            }
        }
    }

    let _ = writeln!(s, "\n## Consistency audit: alpha = rho * tau per episode\n");
    for r in &rows {
        let name = episodes_file(&r.controller);
        let path = cfg.output.dir.join(&name);
        match audit(&path) {
            Ok(bad) if bad.is_empty() => {
                let _ = writeln!(s, "- {name}: ok");
            }
            Ok(bad) => {
                let _ = writeln!(s, "- {name}: FLAGGED, {} rows", bad.len());
                for b in bad {
                    let _ = writeln!(s, "  - {b}");
                }
            }
            Err(err) => {
                let _ = writeln!(s, "- {name}: not checked ({err})");
            }
        }
    }
    Ok(s)
}
