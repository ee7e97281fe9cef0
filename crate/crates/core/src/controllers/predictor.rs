//! Gaussian naive Bayes estimate of the exit probability given only the
//! early confidence.

use std::f64::consts::PI;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::mdp::ThresholdPolicy;
use crate::trace::ConfidenceSample;

/// Lower bound on class-conditional variances.
pub const VARIANCE_FLOOR: f64 = 1e-6;

/// Two-class Gaussian naive Bayes over the scalar feature `z_e`. Class 1
/// means "the oracle threshold policy would exit".
#[derive(Debug, Clone, PartialEq)]
pub struct ExitPredictor {
    pub gamma: f64,
    /// `Pr[t = 1]`. Exactly 0 or 1 only for single-class fits.
    pub prior1: f64,
    pub mu0: f64,
    pub var0: f64,
    pub mu1: f64,
    pub var1: f64,
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 1.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.max(VARIANCE_FLOOR))
}

fn log_normal_density(z: f64, mu: f64, var: f64) -> f64 {
    -0.5 * (2.0 * PI * var).ln() - (z - mu).powi(2) / (2.0 * var)
}

/// Labels each sample `t = 1` iff `z_c - z_e <= gamma` and fits priors and
/// per-class Gaussian MLEs on `z_e`. Two-class priors use Laplace smoothing
/// `(n1 + 1) / (n + 2)`; single-class fits give a constant posterior.
pub fn fit_exit_predictor(samples: &[ConfidenceSample], gamma: f64) -> ExitPredictor {
    let (ones, zeros): (Vec<f64>, Vec<f64>) = {
        let mut ones = Vec::new();
        let mut zeros = Vec::new();
        for s in samples {
            if s.gap() <= gamma {
                ones.push(s.z_e);
            } else {
                zeros.push(s.z_e);
            }
        }
        (ones, zeros)
    };
    let prior1 = match (ones.len(), zeros.len()) {
        (0, _) => 0.0,
        (_, 0) => 1.0,
        (n1, n0) => (n1 as f64 + 1.0) / ((n1 + n0) as f64 + 2.0),
    };
    let (mu0, var0) = mean_var(&zeros);
    let (mu1, var1) = mean_var(&ones);
    ExitPredictor {
        gamma,
        prior1,
        mu0,
        var0,
        mu1,
        var1,
    }
}

/// Posterior `p(t = 1 | z_e)`.
pub fn predict_exit_prob(pred: &ExitPredictor, z_e: f64) -> f64 {
    if pred.prior1 <= 0.0 {
        return 0.0;
    }
    if pred.prior1 >= 1.0 {
        return 1.0;
    }
    let log_odds = pred.prior1.ln() - (1.0 - pred.prior1).ln() + log_normal_density(z_e, pred.mu1, pred.var1)
        - log_normal_density(z_e, pred.mu0, pred.var0);
    if log_odds >= 0.0 {
        1.0 / (1.0 + (-log_odds).exp())
    } else {
        let e = log_odds.exp();
        e / (1.0 + e)
    }
}

impl ExitPredictor {
    pub fn predict(&self, z_e: f64) -> f64 {
        predict_exit_prob(self, z_e)
    }
}

/// One predictor per distinct threshold of a policy. States sharing a
/// threshold share the fit, since the labels depend on the threshold only.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PredictorMap {
    // sorted by gamma
    predictors: Vec<ExitPredictor>,
}

impl PredictorMap {
    pub fn fit(policy: &ThresholdPolicy, nb: &[ConfidenceSample]) -> Result<Self> {
        if nb.is_empty() {
            return Err(Error::Empty("predictor fit needs at least one sample"));
        }
        let predictors = policy
            .distinct_gammas()
            .into_iter()
            .map(|g| fit_exit_predictor(nb, g))
            .collect();
        Ok(Self { predictors })
    }

    pub fn from_predictors(mut predictors: Vec<ExitPredictor>) -> Self {
        predictors.sort_by(|a, b| a.gamma.total_cmp(&b.gamma));
        Self { predictors }
    }

    pub fn get(&self, gamma: f64) -> Option<&ExitPredictor> {
        self.predictors
            .binary_search_by(|p| p.gamma.total_cmp(&gamma))
            .ok()
            .map(|i| &self.predictors[i])
    }

    pub fn predictors(&self) -> &[ExitPredictor] {
        &self.predictors
    }

    /// True when every threshold of `policy` has a predictor.
    pub fn covers(&self, policy: &ThresholdPolicy) -> bool {
        policy.distinct_gammas().iter().all(|&g| self.get(g).is_some())
    }

    /// Writes `gamma,prior1,mu0,var0,mu1,var1` with exact decimals.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        writeln!(w, "gamma,prior1,mu0,var0,mu1,var1")?;
        for p in &self.predictors {
            writeln!(w, "{},{},{},{},{},{}", p.gamma, p.prior1, p.mu0, p.var0, p.mu1, p.var1)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let err = |line: u64, msg: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            msg,
        };
        let mut lines = BufReader::new(File::open(path)?).lines();
        match lines.next() {
            Some(Ok(h)) if h.trim() == "gamma,prior1,mu0,var0,mu1,var1" => {}
            _ => return Err(err(1, "expected header gamma,prior1,mu0,var0,mu1,var1".into())),
        }
        let mut out = Vec::new();
        for (i, line) in lines.enumerate() {
            let line = line?;
            let lno = i as u64 + 2;
            if line.trim().is_empty() {
                continue;
            }
            let v: Vec<f64> = line
                .split(',')
                .map(|f| f.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| err(lno, e.to_string()))?;
            if v.len() != 6 {
                return Err(err(lno, format!("expected 6 fields, found {}", v.len())));
            }
            out.push(ExitPredictor {
                gamma: v[0],
                prior1: v[1],
                mu0: v[2],
                var0: v[3],
                mu1: v[4],
                var1: v[5],
            });
        }
        Ok(Self::from_predictors(out))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample(z_e: f64, gap: f64) -> ConfidenceSample {
        ConfidenceSample {
            z_e,
            z_c: z_e + gap,
            correct_e: true,
            correct_c: true,
        }
    }

    fn symmetric() -> Vec<ConfidenceSample> {
        // class 1 (small gap) around 0.8, class 0 around 0.4, equal spread
        vec![
            sample(0.7, 0.0),
            sample(0.9, 0.0),
            sample(0.3, 0.5),
            sample(0.5, 0.4),
        ]
    }

    #[test]
    fn single_class_fits_are_constant() {
        let s = symmetric();
        let all_exit = fit_exit_predictor(&s, 1.0);
        assert_eq!(all_exit.prior1, 1.0);
        for z in [0.1, 0.5, 1.0] {
            assert_eq!(predict_exit_prob(&all_exit, z), 1.0);
        }
        let none = fit_exit_predictor(&s, -1.0);
        for z in [0.1, 0.5, 1.0] {
            assert_eq!(predict_exit_prob(&none, z), 0.0);
        }
    }

    #[test]
    fn midpoint_of_symmetric_classes_is_half() {
        let p = fit_exit_predictor(&symmetric(), 0.1);
        assert!((p.mu0 - 0.4).abs() < 1e-12 && (p.mu1 - 0.8).abs() < 1e-12);
        assert!((p.var0 - p.var1).abs() < 1e-15);
        assert_eq!(p.prior1, 0.5);
        assert!((predict_exit_prob(&p, 0.6) - 0.5).abs() < 1e-9);
    }

    #[test]
    fn posterior_monotone_for_equal_variances() {
        let p = ExitPredictor {
            gamma: 0.0,
            prior1: 0.3,
            mu0: 0.4,
            var0: 0.02,
            mu1: 0.85,
            var1: 0.02,
        };
        let mut prev = 0.0;
        for i in 0..=10_000 {
            let z = i as f64 / 10_000.0;
            let q = predict_exit_prob(&p, z);
            assert!(q >= prev);
            prev = q;
        }
    }

    #[test]
    fn variance_floor_applies() {
        let s = vec![sample(0.5, 0.0), sample(0.5, 0.0), sample(0.2, 0.5)];
        let p = fit_exit_predictor(&s, 0.1);
        assert_eq!(p.var1, VARIANCE_FLOOR);
        assert_eq!(p.var0, VARIANCE_FLOOR);
        assert!((p.prior1 - 3.0 / 5.0).abs() < 1e-12);
    }

    #[test]
    fn csv_round_trip() {
        let preds = vec![
            fit_exit_predictor(&symmetric(), 0.1),
            fit_exit_predictor(&symmetric(), 1.0),
        ];
        let map = PredictorMap::from_predictors(preds);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("predictor.csv");
        map.write_csv(&path).unwrap();
        assert_eq!(PredictorMap::read_csv(&path).unwrap(), map);
        assert!(map.get(0.1).is_some());
        assert!(map.get(0.2).is_none());
    }

    proptest! {
        #[test]
        fn posterior_is_a_probability(
            prior in 0.0f64..=1.0,
            mu0 in -2.0f64..2.0,
            mu1 in -2.0f64..2.0,
            var0 in VARIANCE_FLOOR..1.0,
            var1 in VARIANCE_FLOOR..1.0,
            z in -1e3f64..1e3,
        ) {
            let p = ExitPredictor { gamma: 0.0, prior1: prior, mu0, var0, mu1, var1 };
            let q = predict_exit_prob(&p, z);
            prop_assert!((0.0..=1.0).contains(&q));
        }
    }
}
