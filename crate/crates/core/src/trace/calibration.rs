//! Temperature scaling of raw exit logits.

use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use super::ConfidenceSample;
use crate::error::{Error, Result};

/// Search interval for the temperature.
pub const TEMPERATURE_RANGE: (f64, f64) = (0.05, 20.0);

/// Width of the final log-temperature bracket.
const LOG_T_TOL: f64 = 1e-7;

/// Raw logits of both exits for one labelled input.
#[derive(Debug, Clone, PartialEq)]
pub struct LogitRecord {
    pub logits_e: Vec<f64>,
    pub logits_c: Vec<f64>,
    pub label: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Head {
    Early,
    Final,
}

impl LogitRecord {
    pub fn logits(&self, head: Head) -> &[f64] {
        match head {
            Head::Early => &self.logits_e,
            Head::Final => &self.logits_c,
        }
    }
}

fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

/// Negative log-likelihood of `label` under `softmax(logits / t)`.
fn nll(logits: &[f64], label: usize, t: f64) -> f64 {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max) / t;
    let lse = max + logits.iter().map(|&l| (l / t - max).exp()).sum::<f64>().ln();
    lse - logits[label] / t
}

pub fn mean_nll(records: &[LogitRecord], head: Head, t: f64) -> f64 {
    records.iter().map(|r| nll(r.logits(head), r.label, t)).sum::<f64>() / records.len() as f64
}

/// Max softmax probability and its class at temperature `t`.
pub fn softmax_max(logits: &[f64], t: f64) -> (f64, usize) {
    let k = argmax(logits);
    let top = logits[k] / t;
    let denom: f64 = logits.iter().map(|&l| (l / t - top).exp()).sum();
    (1.0 / denom, k)
}

/// Temperature minimizing the mean NLL of one head, by golden-section
/// search on `ln t` over [`TEMPERATURE_RANGE`].
pub fn temperature_scale(records: &[LogitRecord], head: Head) -> Result<f64> {
    if records.is_empty() {
        return Err(Error::Empty("temperature scaling needs at least one record"));
    }
    let f = |log_t: f64| mean_nll(records, head, log_t.exp());
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (TEMPERATURE_RANGE.0.ln(), TEMPERATURE_RANGE.1.ln());
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > LOG_T_TOL {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    Ok(((a + b) / 2.0).exp())
}

/// Converts logit records into confidence samples at the given temperatures.
pub fn calibrate_records(records: &[LogitRecord], t_early: f64, t_final: f64) -> Vec<ConfidenceSample> {
    records
        .iter()
        .map(|r| {
            let (z_e, k_e) = softmax_max(&r.logits_e, t_early);
            let (z_c, k_c) = softmax_max(&r.logits_c, t_final);
            ConfidenceSample {
                z_e,
                z_c,
                correct_e: k_e == r.label,
                correct_c: k_c == r.label,
            }
        })
        .collect()
}

/// Reads `label,logits_e_0..logits_e_{C-1},logits_c_0..logits_c_{C-1}`.
pub fn ingest_logits_csv(path: impl AsRef<Path>) -> Result<Vec<LogitRecord>> {
    let path = path.as_ref();
    let parse_err = |line: u64, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut rdr = csv::Reader::from_reader(BufReader::new(File::open(path)?));
    let header = rdr.headers()?.clone();
    let cols = header.len();
    if cols < 5 || (cols - 1) % 2 != 0 || &header[0] != "label" {
        return Err(parse_err(1, "expected label,logits_e_*,logits_c_* header".into()));
    }
    let c = (cols - 1) / 2;
    for i in 0..c {
        if header[1 + i] != *format!("logits_e_{i}") || header[1 + c + i] != *format!("logits_c_{i}") {
            return Err(parse_err(1, format!("unexpected column names near index {i}")));
        }
    }
    let mut out = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| parse_err(e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line());
        let label: usize = record[0]
            .trim()
            .parse()
            .map_err(|_| parse_err(line, format!("bad label `{}`", &record[0])))?;
        if label >= c {
            return Err(Error::Validation {
                path: path.to_path_buf(),
                line,
                msg: format!("label {label} out of range for {c} classes"),
            });
        }
        let mut vals = Vec::with_capacity(2 * c);
        for i in 1..cols {
            let v: f64 = record[i]
                .trim()
                .parse()
                .map_err(|_| parse_err(line, format!("bad logit `{}`", &record[i])))?;
            vals.push(v);
        }
        let logits_c = vals.split_off(c);
        out.push(LogitRecord {
            logits_e: vals,
            logits_c,
            label,
        });
    }
    Ok(out)
}
