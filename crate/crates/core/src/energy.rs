//! Ambient energy source, harvested-energy arrivals and battery dynamics.
//!
//! The source is a two-state Markov chain over {good, bad}. In a good slot
//! the device harvests 0, 1 or 2 quanta; in a bad slot it harvests nothing.
//! The battery evolves as `B' = min(B - u(A) + W, b_max)`.

use rand::Rng;

use crate::error::{Error, Result};

/// Tolerance on the arrival probabilities summing to one.
const LAMBDA_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Condition {
    Good,
    Bad,
}

impl Condition {
    pub const ALL: [Condition; 2] = [Condition::Good, Condition::Bad];

    pub fn index(self) -> usize {
        match self {
            Condition::Good => 0,
            Condition::Bad => 1,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Condition::Good => "G",
            Condition::Bad => "B",
        }
    }

    pub fn from_symbol(s: &str) -> Option<Self> {
        match s {
            "G" | "g" | "good" => Some(Condition::Good),
            "B" | "b" | "bad" => Some(Condition::Bad),
            _ => None,
        }
    }
}

/// Parameters of the energy source, the arrival law, the battery and the
/// per-action energy costs (in quanta). Discarding always costs zero.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyParams {
    /// Probability of staying in the good state.
    pub p_good: f64,
    /// Probability of staying in the bad state.
    pub p_bad: f64,
    /// Probabilities of harvesting 0, 1, 2 quanta in a good slot.
    pub lambda: [f64; 3],
    pub b_max: u32,
    pub u_exit: u32,
    pub u_continue: u32,
}

impl Default for EnergyParams {
    fn default() -> Self {
        Self {
            p_good: 0.9,
            p_bad: 0.6,
            lambda: [0.1, 0.2, 0.7],
            b_max: 50,
            u_exit: 1,
            u_continue: 2,
        }
    }
}

impl EnergyParams {
    pub fn new(
        p_good: f64,
        p_bad: f64,
        lambda: [f64; 3],
        b_max: u32,
        u_exit: u32,
        u_continue: u32,
    ) -> Result<Self> {
        let params = Self {
            p_good,
            p_bad,
            lambda,
            b_max,
            u_exit,
            u_continue,
        };
        params.validate()?;
        Ok(params)
    }

    /// Every violated invariant, as human-readable messages.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        if !unit(self.p_good) {
            out.push(format!("p_good = {} is not in [0, 1]", self.p_good));
        }
        if !unit(self.p_bad) {
            out.push(format!("p_bad = {} is not in [0, 1]", self.p_bad));
        }
        for (i, &l) in self.lambda.iter().enumerate() {
            if !unit(l) {
                out.push(format!("lambda[{i}] = {l} is not in [0, 1]"));
            }
        }
        let sum: f64 = self.lambda.iter().sum();
        if (sum - 1.0).abs() > LAMBDA_SUM_TOL {
            out.push(format!("lambda sums to {sum}, expected 1"));
        }
        if self.u_exit == 0 {
            out.push("u_exit must be positive".to_string());
        }
        if self.u_continue <= self.u_exit {
            out.push(format!(
                "u_continue = {} must exceed u_exit = {}",
                self.u_continue, self.u_exit
            ));
        }
        if self.u_continue > self.b_max {
            out.push(format!(
                "u_continue = {} exceeds b_max = {}",
                self.u_continue, self.b_max
            ));
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidParams(v.join("; ")))
        }
    }

    /// Probability of moving from `from` to `to` in one slot.
    pub fn source_transition(&self, from: Condition, to: Condition) -> f64 {
        match (from, to) {
            (Condition::Good, Condition::Good) => self.p_good,
            (Condition::Good, Condition::Bad) => 1.0 - self.p_good,
            (Condition::Bad, Condition::Bad) => self.p_bad,
            (Condition::Bad, Condition::Good) => 1.0 - self.p_bad,
        }
    }

    /// Probability of harvesting `w` quanta given the current condition.
    pub fn arrival_prob(&self, h: Condition, w: u32) -> f64 {
        match (h, w) {
            (Condition::Good, 0..=2) => self.lambda[w as usize],
            (Condition::Bad, 0) => 1.0,
            _ => 0.0,
        }
    }

    pub fn num_states(&self) -> usize {
        2 * (self.b_max as usize + 1)
    }
}

/// MDP state: battery level and the harvesting condition of the previous slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SystemState {
    pub b: u32,
    pub h: Condition,
}

impl SystemState {
    pub fn new(b: u32, h: Condition) -> Self {
        Self { b, h }
    }

    /// Dense index `2b + h` used by the MDP matrices.
    pub fn index(&self) -> usize {
        2 * self.b as usize + self.h.index()
    }

    pub fn from_index(idx: usize) -> Self {
        let h = if idx.is_multiple_of(2) {
            Condition::Good
        } else {
            Condition::Bad
        };
        Self {
            b: (idx / 2) as u32,
            h,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HarvestOutcome {
    pub h_next: Condition,
    pub w: u32,
}

/// Steady-state probability of the good condition.
pub fn steady_state_good(params: &EnergyParams) -> Result<f64> {
    let leave_good = 1.0 - params.p_good;
    let leave_bad = 1.0 - params.p_bad;
    match (leave_good == 0.0, leave_bad == 0.0) {
        (true, true) => Err(Error::ReducibleChain),
        (true, false) => Ok(1.0),
        (false, true) => Ok(0.0),
        (false, false) => Ok(leave_bad / (leave_good + leave_bad)),
    }
}

/// Long-run mean harvested quanta per slot.
pub fn average_energy_rate(params: &EnergyParams) -> Result<f64> {
    let pg = steady_state_good(params)?;
    Ok((params.lambda[1] + 2.0 * params.lambda[2]) * pg)
}

/// Advances the source by one slot.
///
/// Draw order: one uniform for the condition transition, then, only when the
/// new condition is good, one uniform for the arrival.
pub fn step_source<R: Rng + ?Sized>(h: Condition, rng: &mut R, params: &EnergyParams) -> HarvestOutcome {
    let u: f64 = rng.random();
    let h_next = match h {
        Condition::Good if u < params.p_good => Condition::Good,
        Condition::Good => Condition::Bad,
        Condition::Bad if u < params.p_bad => Condition::Bad,
        Condition::Bad => Condition::Good,
    };
    let w = match h_next {
        Condition::Bad => 0,
        Condition::Good => {
            let v: f64 = rng.random();
            if v < params.lambda[0] {
                0
            } else if v < params.lambda[0] + params.lambda[1] {
                1
            } else {
                2
            }
        }
    };
    HarvestOutcome { h_next, w }
}

/// Battery recursion `min(b - cost + w, b_max)`.
pub fn step_battery(b: u32, cost: u32, w: u32, params: &EnergyParams) -> Result<u32> {
    if cost > b {
        return Err(Error::InfeasibleAction { cost, battery: b });
    }
    Ok((b - cost + w).min(params.b_max))
}
