use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::{AggregateResult, Estimate};
use crate::error::{Error, Result};

pub const SUMMARY_HEADER: &str = "controller,alpha_mean,alpha_ci,rho_mean,rho_ci,tau_mean,tau_ci";

/// `episode,tau,rho,alpha,served,correct`
pub fn write_episodes_csv(path: impl AsRef<Path>, agg: &AggregateResult) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "episode,tau,rho,alpha,served,correct")?;
    for (i, e) in agg.episodes.iter().enumerate() {
        writeln!(
            w,
            "{i},{:.9},{:.9},{:.9},{},{}",
            e.tau, e.rho, e.alpha, e.served, e.correct
        )?;
    }
    w.flush()?;
    Ok(())
}

/// `t,battery_mean,battery_halfwidth,cumenergy_mean,cumenergy_halfwidth`
pub fn write_trajectory_csv(path: impl AsRef<Path>, agg: &AggregateResult) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "t,battery_mean,battery_halfwidth,cumenergy_mean,cumenergy_halfwidth")?;
    for (t, (b, e)) in agg.battery.iter().zip(&agg.cumulative_energy).enumerate() {
        writeln!(
            w,
            "{t},{:.6},{:.6},{:.6},{:.6}",
            b.mean, b.half_width, e.mean, e.half_width
        )?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_summary_csv(path: impl AsRef<Path>, aggs: &[AggregateResult]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{SUMMARY_HEADER}")?;
    for a in aggs {
        writeln!(
            w,
            "{},{:.9},{:.9},{:.9},{:.9},{:.9},{:.9}",
            a.kind.name(),
            a.alpha.mean,
            a.alpha.half_width,
            a.rho.mean,
            a.rho.half_width,
            a.tau.mean,
            a.tau.half_width
        )?;
    }
    w.flush()?;
    Ok(())
}

/// One row of the summary table.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub controller: String,
    pub alpha: Estimate,
    pub rho: Estimate,
    pub tau: Estimate,
}

pub fn read_summary_csv(path: impl AsRef<Path>) -> Result<Vec<SummaryRow>> {
    let path = path.as_ref();
    let err = |line: u64, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut lines = BufReader::new(File::open(path)?).lines();
    match lines.next() {
        Some(Ok(h)) if h.trim() == SUMMARY_HEADER => {}
        _ => return Err(err(1, format!("expected header {SUMMARY_HEADER}"))),
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        let lno = i as u64 + 2;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != 7 {
            return Err(err(lno, format!("expected 7 fields, found {}", f.len())));
        }
        let v: Vec<f64> = f[1..]
            .iter()
            .map(|s| s.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| err(lno, e.to_string()))?;
        let est = |i: usize| Estimate {
            mean: v[i],
            half_width: v[i + 1],
        };
        rows.push(SummaryRow {
            controller: f[0].to_string(),
            alpha: est(0),
            rho: est(2),
            tau: est(4),
        });
    }
    Ok(rows)
}
