//! Average-reward MDP over per-state exit thresholds.
//!
//! In every state with `b >= u_c` the controller picks a threshold `gamma`
//! and exits iff the confidence gap `J <= gamma`. The threshold enters the
//! dynamics only through the exit probability `F_J(gamma)` and the reward
//! only through `r(gamma) = E[z_e 1{J <= gamma} + z_c 1{J > gamma}]`, so the
//! search runs over a finite quantile grid of the gap distribution.

mod exchange;
mod kernel;
mod oracle;
mod solver;

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::energy::{Condition, EnergyParams, SystemState};
use crate::error::{Error, Result};
use crate::trace::{build_gap_distribution, ConfidenceSample, GapDistribution};

pub use exchange::threshold_exchange_check;
pub use kernel::{build_transition_kernel, Kernel};
pub use oracle::{brute_force_oracle, stationary_gain, ORACLE_LIMIT};
pub use solver::{evaluate_policy, policy_iteration, DEFAULT_MAX_ITERATIONS};

/// Default number of grid points: a "never exit" sentinel plus 256 quantile
/// levels, the last of which is the largest gap ("always exit").
pub const DEFAULT_GRID_SIZE: usize = 257;

/// Monte-Carlo estimate of the immediate reward of threshold `gamma`.
pub fn reward_estimate(samples: &[ConfidenceSample], gamma: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Empty("reward estimate needs at least one sample"));
    }
    let total: f64 = samples
        .iter()
        .map(|s| if s.gap() <= gamma { s.z_e } else { s.z_c })
        .sum();
    Ok(total / samples.len() as f64)
}

/// Reward for many thresholds at once via prefix sums over samples sorted
/// by gap. Matches [`reward_estimate`] point by point.
pub fn reward_curve(samples: &[ConfidenceSample], gammas: &[f64]) -> Result<Vec<f64>> {
    if samples.is_empty() {
        return Err(Error::Empty("reward estimate needs at least one sample"));
    }
    let mut sorted: Vec<&ConfidenceSample> = samples.iter().collect();
    sorted.sort_by(|a, b| a.gap().total_cmp(&b.gap()));
    let n = sorted.len();
    let mut exit_prefix = vec![0.0; n + 1];
    let mut cont_suffix = vec![0.0; n + 1];
    for i in 0..n {
        exit_prefix[i + 1] = exit_prefix[i] + sorted[i].z_e;
    }
    for i in (0..n).rev() {
        cont_suffix[i] = cont_suffix[i + 1] + sorted[i].z_c;
    }
    Ok(gammas
        .iter()
        .map(|&g| {
            let m = sorted.partition_point(|s| s.gap() <= g);
            (exit_prefix[m] + cont_suffix[m]) / n as f64
        })
        .collect())
}

/// Candidate thresholds, sorted ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdGrid {
    points: Vec<f64>,
}

impl ThresholdGrid {
    /// `size == 1` gives just the largest gap (always exit). Otherwise the
    /// grid is one point one step below the smallest gap, then the
    /// quantiles at levels `k / (size - 1)` for `k = 1..size-1`.
    pub fn from_distribution(dist: &GapDistribution, size: usize) -> Result<Self> {
        if size == 0 {
            return Err(Error::InvalidParams("threshold grid must have at least one point".into()));
        }
        let hi = dist.support_hi();
        if size == 1 {
            return Ok(Self { points: vec![hi] });
        }
        let levels = size - 1;
        let lo = dist.support_lo();
        let step = if hi > lo { (hi - lo) / levels as f64 } else { 1e-6 };
        let mut points = Vec::with_capacity(size);
        points.push(lo - step);
        points.extend((1..=levels).map(|k| dist.quantile(k as f64 / levels as f64)));
        Ok(Self { points })
    }

    pub fn from_points(mut points: Vec<f64>) -> Result<Self> {
        if points.is_empty() || points.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidParams("grid points must be finite and non-empty".into()));
        }
        points.sort_by(f64::total_cmp);
        Ok(Self { points })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Finite MDP with thresholds as actions.
#[derive(Debug, Clone)]
pub struct MdpModel {
    pub params: EnergyParams,
    pub grid: ThresholdGrid,
    /// `r(gamma)` per grid point.
    pub reward: Vec<f64>,
    /// `F_J(gamma)` per grid point.
    pub exit_prob: Vec<f64>,
    /// Reward in the forced-exit band `u_e <= b < u_c`: the mean early
    /// confidence.
    pub forced_exit_reward: f64,
    pub kernel: Kernel,
}

impl MdpModel {
    /// Estimates rewards and exit probabilities on `est` and builds the
    /// quantile grid of the given size.
    pub fn from_samples(params: &EnergyParams, est: &[ConfidenceSample], grid_size: usize) -> Result<Self> {
        let dist = build_gap_distribution(est)?;
        let grid = ThresholdGrid::from_distribution(&dist, grid_size)?;
        Self::with_grid(params, est, grid)
    }

    pub fn with_grid(params: &EnergyParams, est: &[ConfidenceSample], grid: ThresholdGrid) -> Result<Self> {
        let dist = build_gap_distribution(est)?;
        let reward = reward_curve(est, grid.points())?;
        let exit_prob = grid.points().iter().map(|&g| dist.cdf(g)).collect();
        let forced_exit_reward = crate::trace::mean_early_confidence(est);
        Self::from_parts(params, grid, reward, exit_prob, forced_exit_reward)
    }

    pub fn from_parts(
        params: &EnergyParams,
        grid: ThresholdGrid,
        reward: Vec<f64>,
        exit_prob: Vec<f64>,
        forced_exit_reward: f64,
    ) -> Result<Self> {
        params.validate()?;
        if reward.len() != grid.len() || exit_prob.len() != grid.len() {
            return Err(Error::InvalidParams(
                "reward and exit probability must be evaluated on the grid".into(),
            ));
        }
        Ok(Self {
            params: params.clone(),
            grid,
            reward,
            exit_prob,
            forced_exit_reward,
            kernel: build_transition_kernel(params),
        })
    }

    pub fn num_states(&self) -> usize {
        self.params.num_states()
    }

    /// Number of states where the threshold is a free choice.
    pub fn num_choice_states(&self) -> usize {
        2 * (self.params.b_max - self.params.u_continue + 1) as usize
    }

    /// Dense state index of the `i`-th choice state.
    pub(crate) fn choice_state(&self, i: usize) -> usize {
        2 * self.params.u_continue as usize + i
    }

    /// Immediate reward and transition row of `state` when choice states
    /// use the grid indices in `choice`.
    pub(crate) fn state_dynamics(&self, state: usize, choice: &[usize], row: &mut [f64]) -> f64 {
        use crate::controllers::Action;
        let b = SystemState::from_index(state).b;
        let p = &self.params;
        if b < p.u_exit {
            row.copy_from_slice(self.kernel.row(state, Action::Discard).unwrap());
            0.0
        } else if b < p.u_continue {
            row.copy_from_slice(self.kernel.row(state, Action::ExitEarly).unwrap());
            self.forced_exit_reward
        } else {
            let g = choice[state - 2 * p.u_continue as usize];
            let f = self.exit_prob[g];
            let e = self.kernel.row(state, Action::ExitEarly).unwrap();
            let c = self.kernel.row(state, Action::ContinueFull).unwrap();
            for ((r, pe), pc) in row.iter_mut().zip(e).zip(c) {
                *r = f * pe + (1.0 - f) * pc;
            }
            self.reward[g]
        }
    }

    pub fn policy_from_choice(&self, choice: &[usize]) -> ThresholdPolicy {
        ThresholdPolicy {
            b_max: self.params.b_max,
            u_exit: self.params.u_exit,
            u_continue: self.params.u_continue,
            gammas: choice.iter().map(|&g| self.grid.points()[g]).collect(),
            exit_probs: choice.iter().map(|&g| self.exit_prob[g]).collect(),
        }
    }
}

/// One threshold per state with `b >= u_c`; forced discard below `u_e` and
/// forced exit in `u_e <= b < u_c`.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdPolicy {
    pub b_max: u32,
    pub u_exit: u32,
    pub u_continue: u32,
    gammas: Vec<f64>,
    exit_probs: Vec<f64>,
}

impl ThresholdPolicy {
    /// Same threshold in every choice state.
    pub fn uniform(params: &EnergyParams, gamma: f64, exit_prob: f64) -> Self {
        let n = 2 * (params.b_max - params.u_continue + 1) as usize;
        Self {
            b_max: params.b_max,
            u_exit: params.u_exit,
            u_continue: params.u_continue,
            gammas: vec![gamma; n],
            exit_probs: vec![exit_prob; n],
        }
    }

    fn slot(&self, state: &SystemState) -> Option<usize> {
        (state.b >= self.u_continue && state.b <= self.b_max)
            .then(|| 2 * (state.b - self.u_continue) as usize + state.h.index())
    }

    /// Threshold for `state`, or `None` in the forced-action band.
    pub fn gamma(&self, state: &SystemState) -> Option<f64> {
        self.slot(state).map(|i| self.gammas[i])
    }

    /// Exit probability `F_J(gamma_s)` on the estimation split. Forced
    /// states report 1 (exit) or 0 (discard).
    pub fn exit_prob(&self, state: &SystemState) -> f64 {
        match self.slot(state) {
            Some(i) => self.exit_probs[i],
            None if state.b >= self.u_exit => 1.0,
            None => 0.0,
        }
    }

    /// `(state, gamma, exit_prob)` for every choice state in `b`, then `h`
    /// order.
    pub fn entries(&self) -> impl Iterator<Item = (SystemState, f64, f64)> + '_ {
        self.gammas.iter().zip(&self.exit_probs).enumerate().map(|(i, (&g, &e))| {
            let b = self.u_continue + (i / 2) as u32;
            let h = if i % 2 == 0 { Condition::Good } else { Condition::Bad };
            (SystemState::new(b, h), g, e)
        })
    }

    /// Distinct thresholds in ascending order.
    pub fn distinct_gammas(&self) -> Vec<f64> {
        let mut g = self.gammas.clone();
        g.sort_by(f64::total_cmp);
        g.dedup();
        g
    }

    /// Writes `b,h,gamma,exit_prob`. Thresholds use the shortest exact
    /// decimal so reading them back is lossless.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        writeln!(w, "b,h,gamma,exit_prob")?;
        for (s, g, e) in self.entries() {
            writeln!(w, "{},{},{},{:.9}", s.b, s.h.symbol(), g, e)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(path: impl AsRef<Path>, params: &EnergyParams) -> Result<Self> {
        let path = path.as_ref();
        let err = |line: u64, msg: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            msg,
        };
        let reader = BufReader::new(File::open(path)?);
        let mut policy = Self::uniform(params, f64::NAN, f64::NAN);
        let mut lines = reader.lines();
        match lines.next() {
            Some(Ok(h)) if h.trim() == "b,h,gamma,exit_prob" => {}
            _ => return Err(err(1, "expected header b,h,gamma,exit_prob".into())),
        }
        for (i, line) in lines.enumerate() {
            let line = line?;
            let lno = i as u64 + 2;
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            if f.len() != 4 {
                return Err(err(lno, format!("expected 4 fields, found {}", f.len())));
            }
            let b: u32 = f[0].parse().map_err(|_| err(lno, format!("bad battery level `{}`", f[0])))?;
            let h = Condition::from_symbol(f[1]).ok_or_else(|| err(lno, format!("bad condition `{}`", f[1])))?;
            let g: f64 = f[2].parse().map_err(|_| err(lno, format!("bad gamma `{}`", f[2])))?;
            let e: f64 = f[3].parse().map_err(|_| err(lno, format!("bad exit_prob `{}`", f[3])))?;
            let slot = policy
                .slot(&SystemState::new(b, h))
                .ok_or_else(|| err(lno, format!("state ({b}, {}) has no threshold", h.symbol())))?;
            policy.gammas[slot] = g;
            policy.exit_probs[slot] = e;
        }
        if policy.gammas.iter().any(|g| g.is_nan()) {
            return Err(err(0, "policy does not cover every state with b >= u_c".into()));
        }
        Ok(policy)
    }
}

/// Output of a solver.
#[derive(Debug, Clone)]
pub struct PiSolution {
    pub policy: ThresholdPolicy,
    /// Grid index chosen in each choice state.
    pub choice: Vec<usize>,
    /// Long-run average reward.
    pub gain: f64,
    /// Relative value per state, zero at the reference state.
    pub bias: Vec<f64>,
    pub iterations: usize,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng_from_seed;
    use crate::trace::{generate_synthetic, GeneratorConfig};

    fn pair(z_e: f64, z_c: f64) -> ConfidenceSample {
        ConfidenceSample {
            z_e,
            z_c,
            correct_e: true,
            correct_c: true,
        }
    }

    #[test]
    fn reward_examples() {
        let s = vec![pair(0.9, 0.95), pair(0.6, 0.9)];
        assert!((reward_estimate(&s, 0.1).unwrap() - 0.90).abs() < 1e-12);
        assert!((reward_estimate(&s, -1.0).unwrap() - 0.925).abs() < 1e-12);
        assert!((reward_estimate(&s, 0.5).unwrap() - 0.75).abs() < 1e-12);
        assert!(reward_estimate(&[], 0.0).is_err());
    }

    #[test]
    fn reward_curve_matches_direct_estimate() {
        let s = generate_synthetic(2000, &GeneratorConfig::default(), &mut rng_from_seed(1)).unwrap();
        let dist = build_gap_distribution(&s).unwrap();
        let grid = ThresholdGrid::from_distribution(&dist, 33).unwrap();
        let curve = reward_curve(&s, grid.points()).unwrap();
        for (&g, &r) in grid.points().iter().zip(&curve) {
            assert!((reward_estimate(&s, g).unwrap() - r).abs() < 1e-12);
        }
    }

    #[test]
    fn grid_shape() {
        let s = generate_synthetic(1000, &GeneratorConfig::default(), &mut rng_from_seed(2)).unwrap();
        let dist = build_gap_distribution(&s).unwrap();
        let grid = ThresholdGrid::from_distribution(&dist, DEFAULT_GRID_SIZE).unwrap();
        assert_eq!(grid.len(), DEFAULT_GRID_SIZE);
        assert!(grid.points()[0] < dist.support_lo());
        assert_eq!(dist.cdf(grid.points()[0]), 0.0);
        assert_eq!(*grid.points().last().unwrap(), dist.support_hi());
        assert!(grid.points().windows(2).all(|w| w[0] <= w[1]));
        let single = ThresholdGrid::from_distribution(&dist, 1).unwrap();
        assert_eq!(single.points(), &[dist.support_hi()]);
        assert!(ThresholdGrid::from_distribution(&dist, 0).is_err());
    }

    #[test]
    fn policy_csv_round_trip() {
        let params = EnergyParams {
            b_max: 6,
            ..Default::default()
        };
        let s = generate_synthetic(300, &GeneratorConfig::default(), &mut rng_from_seed(3)).unwrap();
        let model = MdpModel::from_samples(&params, &s, 9).unwrap();
        let sol = policy_iteration(&model, SystemState::new(params.b_max, Condition::Good), 100).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("policy.csv");
        sol.policy.write_csv(&path).unwrap();
        let back = ThresholdPolicy::read_csv(&path, &params).unwrap();
        for ((s1, g1, _), (s2, g2, _)) in sol.policy.entries().zip(back.entries()) {
            assert_eq!(s1, s2);
            assert_eq!(g1.to_bits(), g2.to_bits());
        }
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 1 + 2 * 5);
    }

    #[test]
    fn policy_lookup_bands() {
        let params = EnergyParams {
            b_max: 5,
            u_exit: 1,
            u_continue: 3,
            ..Default::default()
        };
        let pol = ThresholdPolicy::uniform(&params, 0.1, 0.4);
        assert_eq!(pol.gamma(&SystemState::new(2, Condition::Good)), None);
        assert_eq!(pol.gamma(&SystemState::new(3, Condition::Bad)), Some(0.1));
        assert_eq!(pol.exit_prob(&SystemState::new(0, Condition::Good)), 0.0);
        assert_eq!(pol.exit_prob(&SystemState::new(1, Condition::Good)), 1.0);
        assert_eq!(pol.exit_prob(&SystemState::new(5, Condition::Good)), 0.4);
        assert_eq!(pol.entries().count(), 6);
    }
}
