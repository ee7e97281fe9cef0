//! Exhaustive enumeration of threshold policies, used to cross-check policy
//! iteration on small instances.

use rayon::prelude::*;

use super::{solver::evaluate_policy, MdpModel, PiSolution};
use crate::energy::SystemState;
use crate::error::{Error, Result};
use crate::linalg;

/// Maximum number of policies the oracle will enumerate.
pub const ORACLE_LIMIT: u128 = 1_000_000;

/// Stationary distribution of the chain induced by `choice`, or `None` if
/// the chain has more than one recurrent class.
fn stationary(model: &MdpModel, choice: &[usize]) -> Option<(Vec<f64>, Vec<f64>)> {
    let n = model.num_states();
    let mut rewards = vec![0.0; n];
    let mut row = vec![0.0; n];
    // (I - P)^T pi = 0 with the last equation replaced by sum(pi) = 1.
    let mut a = vec![0.0; n * n];
    for s in 0..n {
        rewards[s] = model.state_dynamics(s, choice, &mut row);
        for (j, &p) in row.iter().enumerate() {
            a[j * n + s] -= p;
        }
        a[s * n + s] += 1.0;
    }
    for j in 0..n {
        a[(n - 1) * n + j] = 1.0;
    }
    let mut rhs = vec![0.0; n];
    rhs[n - 1] = 1.0;
    linalg::solve(a, rhs).map(|pi| (pi, rewards))
}

/// Long-run average reward of `choice` computed from its stationary
/// distribution. Errors if the induced chain is not unichain.
pub fn stationary_gain(model: &MdpModel, choice: &[usize]) -> Result<f64> {
    let (pi, r) = stationary(model, choice).ok_or(Error::Unichain)?;
    Ok(pi.iter().zip(&r).map(|(p, x)| p * x).sum())
}

fn decode(mut code: u64, radix: usize, len: usize) -> Vec<usize> {
    let mut out = vec![0; len];
    for slot in out.iter_mut() {
        *slot = (code % radix as u64) as usize;
        code /= radix as u64;
    }
    out
}

/// Enumerates every grid policy, scores it by `sum_s pi(s) r(s)` from its
/// stationary distribution, and returns the best. Policies whose chain is
/// not unichain are skipped. Ties go to the lowest enumeration index.
pub fn brute_force_oracle(model: &MdpModel) -> Result<PiSolution> {
    let radix = model.grid.len();
    let len = model.num_choice_states();
    let count = (radix as u128).checked_pow(len as u32).unwrap_or(u128::MAX);
    if count > ORACLE_LIMIT {
        return Err(Error::EnumerationLimit(count, ORACLE_LIMIT));
    }
    let best = (0..count as u64)
        .into_par_iter()
        .filter_map(|code| {
            let choice = decode(code, radix, len);
            let (pi, r) = stationary(model, &choice)?;
            let gain: f64 = pi.iter().zip(&r).map(|(p, x)| p * x).sum();
            Some((code, gain))
        })
        .reduce_with(|a, b| match a.1.total_cmp(&b.1) {
            std::cmp::Ordering::Less => b,
            std::cmp::Ordering::Greater => a,
            std::cmp::Ordering::Equal => if a.0 <= b.0 { a } else { b },
        })
        .ok_or(Error::Unichain)?;

    let choice = decode(best.0, radix, len);
    let reference = SystemState::new(model.params.b_max, crate::energy::Condition::Good);
    let bias = evaluate_policy(model, &choice, reference)
        .map(|(_, bias)| bias)
        .unwrap_or_else(|_| vec![0.0; model.num_states()]);
    Ok(PiSolution {
        policy: model.policy_from_choice(&choice),
        choice,
        gain: best.1,
        bias,
        iterations: count as usize,
    })
}
