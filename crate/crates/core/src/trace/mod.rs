//! Confidence traces: generation, CSV I/O, temperature scaling, splitting and
//! the empirical distribution of the confidence gap `J = z_c - z_e`.

mod calibration;
mod io;
mod synthetic;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};

pub use calibration::{
    calibrate_records, ingest_logits_csv, mean_nll, softmax_max, temperature_scale, Head, LogitRecord,
    TEMPERATURE_RANGE,
};
pub use io::{emit_csv, ingest_csv, read_samples, write_samples};
pub use synthetic::{generate_synthetic, GeneratorConfig};

/// Slack when checking confidences against `[1/num_classes, 1]`; covers the
/// rounding of 9-digit CSV decimals.
pub const CONFIDENCE_TOL: f64 = 1e-9;

/// Side information for one data slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfidenceSample {
    /// Max softmax at the early exit.
    pub z_e: f64,
    /// Max softmax at the final exit.
    pub z_c: f64,
    pub correct_e: bool,
    pub correct_c: bool,
}

impl ConfidenceSample {
    /// Confidence gained by running the full network.
    pub fn gap(&self) -> f64 {
        self.z_c - self.z_e
    }

    pub fn check(&self, num_classes: usize) -> std::result::Result<(), String> {
        let lo = 1.0 / num_classes as f64 - CONFIDENCE_TOL;
        let hi = 1.0 + CONFIDENCE_TOL;
        for (name, z) in [("z_e", self.z_e), ("z_c", self.z_c)] {
            if !(lo..=hi).contains(&z) {
                return Err(format!("{name} = {z} outside [1/{num_classes}, 1]"));
            }
        }
        Ok(())
    }
}

pub fn mean_early_confidence(samples: &[ConfidenceSample]) -> f64 {
    samples.iter().map(|s| s.z_e).sum::<f64>() / samples.len() as f64
}

/// Disjoint est / nb / test partition of a trace.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TraceSplits {
    pub est: Vec<ConfidenceSample>,
    pub nb: Vec<ConfidenceSample>,
    pub test: Vec<ConfidenceSample>,
}

/// Shuffles indices and cuts them into est / nb / test. Sizes are rounded
/// down and the remainder goes to test.
pub fn split<R: Rng + ?Sized>(
    samples: &[ConfidenceSample],
    fractions: (f64, f64, f64),
    rng: &mut R,
) -> Result<TraceSplits> {
    let (f_est, f_nb, f_test) = fractions;
    let fs = [f_est, f_nb, f_test];
    if fs.iter().any(|f| !(0.0..=1.0).contains(f)) || (fs.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidConfig(format!(
            "split fractions {fractions:?} must be in [0, 1] and sum to 1"
        )));
    }
    let n = samples.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    // Nudge before flooring so 0.3 * 10 lands on 3, not 2.
    let n_est = ((n as f64 * f_est) + 1e-9).floor() as usize;
    let n_nb = (((n as f64 * f_nb) + 1e-9).floor() as usize).min(n - n_est);
    let pick = |range: &[usize]| range.iter().map(|&i| samples[i]).collect::<Vec<_>>();
    Ok(TraceSplits {
        est: pick(&idx[..n_est]),
        nb: pick(&idx[n_est..n_est + n_nb]),
        test: pick(&idx[n_est + n_nb..]),
    })
}

/// Empirical distribution of the confidence gap.
#[derive(Debug, Clone, PartialEq)]
pub struct GapDistribution {
    sorted_gaps: Vec<f64>,
}

impl GapDistribution {
    pub fn from_samples(samples: &[ConfidenceSample]) -> Result<Self> {
        build_gap_distribution(samples)
    }

    pub fn sorted_gaps(&self) -> &[f64] {
        &self.sorted_gaps
    }

    pub fn len(&self) -> usize {
        self.sorted_gaps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted_gaps.is_empty()
    }

    pub fn support_lo(&self) -> f64 {
        self.sorted_gaps[0]
    }

    pub fn support_hi(&self) -> f64 {
        self.sorted_gaps[self.sorted_gaps.len() - 1]
    }

    /// `Pr[J <= gamma]`, right-continuous.
    pub fn cdf(&self, gamma: f64) -> f64 {
        cdf(self, gamma)
    }

    /// Smallest atom `g` with `cdf(g) >= p`, for `p` in `(0, 1]`.
    pub fn quantile(&self, p: f64) -> f64 {
        let n = self.sorted_gaps.len();
        let k = (p * n as f64 - 1e-9).ceil().max(1.0) as usize;
        self.sorted_gaps[k.min(n) - 1]
    }

    pub fn mean(&self) -> f64 {
        self.sorted_gaps.iter().sum::<f64>() / self.sorted_gaps.len() as f64
    }
}

pub fn build_gap_distribution(samples: &[ConfidenceSample]) -> Result<GapDistribution> {
    if samples.is_empty() {
        return Err(Error::Empty("gap distribution needs at least one sample"));
    }
    let mut sorted_gaps: Vec<f64> = samples.iter().map(ConfidenceSample::gap).collect();
    sorted_gaps.sort_by(f64::total_cmp);
    Ok(GapDistribution { sorted_gaps })
}

pub fn cdf(dist: &GapDistribution, gamma: f64) -> f64 {
    let count = dist.sorted_gaps.partition_point(|&g| g <= gamma);
    count as f64 / dist.sorted_gaps.len() as f64
}
