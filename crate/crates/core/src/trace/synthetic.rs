use rand::Rng;
use rand_distr::{Beta, Distribution, StandardNormal};

use super::ConfidenceSample;
use crate::error::{Error, Result};

/// Shape of the synthetic two-exit confidence generator.
///
/// Early confidences follow a scaled Beta on `[1/C, 1]` with mean
/// `acc_early`. The final head shrinks the early "deficit" `1 - z_e` by a
/// lognormal factor whose scale is chosen so that the mean final confidence
/// is `acc_final`. A fraction `overthinking` of samples instead get a final
/// confidence below the early one. Correctness bits are Bernoulli draws on
/// the confidences, so the trace is calibrated by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorConfig {
    pub num_classes: usize,
    pub acc_early: f64,
    pub acc_final: f64,
    /// Relative spread of `z_e` in `[0, 1)`: the Beta standard deviation
    /// divided by its maximum `sqrt(m(1-m))`. Zero gives a constant `z_e`.
    pub spread: f64,
    /// Lognormal sigma linking the final deficit to the early one. Lower
    /// values make `z_c` a tighter function of `z_e`.
    pub noise: f64,
    /// Fraction of samples whose final confidence falls below the early one.
    pub overthinking: f64,
    /// Probability that both correctness bits share one uniform draw.
    pub coupling: f64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            num_classes: 10,
            acc_early: 0.76,
            acc_final: 0.93,
            spread: 0.58,
            noise: 0.5,
            overthinking: 0.02,
            coupling: 0.0,
        }
    }
}

impl GeneratorConfig {
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.num_classes < 2 {
            out.push(format!("num_classes = {} must be at least 2", self.num_classes));
            return out;
        }
        let floor = 1.0 / self.num_classes as f64;
        for (name, a) in [("acc_early", self.acc_early), ("acc_final", self.acc_final)] {
            if !(floor..=1.0).contains(&a) {
                out.push(format!("{name} = {a} outside [1/num_classes, 1]"));
            }
        }
        if self.acc_early > self.acc_final {
            out.push(format!(
                "acc_early = {} exceeds acc_final = {}",
                self.acc_early, self.acc_final
            ));
        }
        if !(0.0..1.0).contains(&self.spread) {
            out.push(format!("spread = {} outside [0, 1)", self.spread));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            out.push(format!("noise = {} must be finite and non-negative", self.noise));
        }
        for (name, p) in [("overthinking", self.overthinking), ("coupling", self.coupling)] {
            if !(0.0..=1.0).contains(&p) {
                out.push(format!("{name} = {p} outside [0, 1]"));
            }
        }
        if out.is_empty() && self.shrink_factor() < 0.0 {
            out.push(format!(
                "overthinking = {} is too large for the accuracy gap",
                self.overthinking
            ));
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(v.join("; ")))
        }
    }

    /// Multiplier `k` on the early deficit for non-overthinking samples,
    /// solving `(1-f) k E[d_e] + f 1.5 E[d_e] = 1 - acc_final`.
    fn shrink_factor(&self) -> f64 {
        let mean_de = 1.0 - self.acc_early;
        if mean_de <= 0.0 {
            return 0.0;
        }
        let f = self.overthinking;
        if f >= 1.0 {
            return 0.0;
        }
        ((1.0 - self.acc_final) - f * 1.5 * mean_de) / ((1.0 - f) * mean_de)
    }
}

/// Draws `n` calibrated samples.
///
/// Per sample the draw order is: early confidence, overthinking switch,
/// final-confidence noise, correctness uniforms (early, coupling switch,
/// final).
pub fn generate_synthetic<R: Rng + ?Sized>(
    n: usize,
    cfg: &GeneratorConfig,
    rng: &mut R,
) -> Result<Vec<ConfidenceSample>> {
    cfg.validate()?;
    let floor = 1.0 / cfg.num_classes as f64;
    let max_deficit = 1.0 - floor;
    let m = (cfg.acc_early - floor) / max_deficit;
    let beta = if cfg.spread > 0.0 && m > 0.0 && m < 1.0 {
        let k = 1.0 / (cfg.spread * cfg.spread) - 1.0;
        Some(Beta::new(m * k, (1.0 - m) * k).map_err(|e| Error::InvalidConfig(e.to_string()))?)
    } else {
        None
    };
    let kappa = cfg.shrink_factor();
    let sigma = cfg.noise;

    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let x = match &beta {
            Some(b) => b.sample(rng),
            None => m,
        };
        let z_e = (floor + max_deficit * x).clamp(floor, 1.0);
        let d_e = 1.0 - z_e;

        let over = rng.random::<f64>() < cfg.overthinking;
        let d_c = if over {
            d_e * (1.0 + rng.random::<f64>())
        } else {
            let eps: f64 = StandardNormal.sample(rng);
            kappa * d_e * (sigma * eps - 0.5 * sigma * sigma).exp()
        };
        let z_c = (1.0 - d_c.min(max_deficit)).clamp(floor, 1.0);

        let u_e: f64 = rng.random();
        let shared = rng.random::<f64>() < cfg.coupling;
        let fresh: f64 = rng.random();
        let u_c = if shared { u_e } else { fresh };
        out.push(ConfidenceSample {
            z_e,
            z_c,
            correct_e: u_e < z_e,
            correct_c: u_c < z_c,
        });
    }
    Ok(out)
}
