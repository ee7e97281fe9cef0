//! Policy iteration for the average-reward threshold MDP.

use super::{MdpModel, PiSolution};
use crate::controllers::Action;
use crate::energy::SystemState;
use crate::error::{Error, Result};
use crate::linalg;

pub const DEFAULT_MAX_ITERATIONS: usize = 1000;

/// Grid points whose improvement value is within this of the best count as
/// tied.
const TIE_TOL: f64 = 1e-12;

/// Solves `rho + V(s) = r(s) + sum_s' P(s'|s) V(s')` with `V(reference) = 0`.
///
/// The unknown slot of `V(reference)` carries `rho`, so the system stays
/// square. Returns `(gain, bias)`.
pub fn evaluate_policy(model: &MdpModel, choice: &[usize], reference: SystemState) -> Result<(f64, Vec<f64>)> {
    let n = model.num_states();
    let r_idx = reference.index();
    if r_idx >= n {
        return Err(Error::InvalidParams(format!(
            "reference state b = {} exceeds b_max = {}",
            reference.b, model.params.b_max
        )));
    }
    let mut a = vec![0.0; n * n];
    let mut rhs = vec![0.0; n];
    let mut row = vec![0.0; n];
    for s in 0..n {
        rhs[s] = model.state_dynamics(s, choice, &mut row);
        for j in 0..n {
            a[s * n + j] = -row[j];
        }
        a[s * n + s] += 1.0;
        a[s * n + r_idx] = 1.0;
    }
    let x = linalg::solve(a, rhs).ok_or(Error::Unichain)?;
    let gain = x[r_idx];
    let mut bias = x;
    bias[r_idx] = 0.0;
    Ok((gain, bias))
}

/// Policy iteration from the always-exit policy.
///
/// Improvement keeps the current threshold when it is tied with the best;
/// otherwise it takes the largest tied threshold (highest exit
/// probability). Stops when no state changes.
pub fn policy_iteration(model: &MdpModel, reference: SystemState, max_iterations: usize) -> Result<PiSolution> {
    if model.grid.is_empty() {
        return Err(Error::InvalidParams("empty threshold grid".into()));
    }
    let top = model.grid.len() - 1;
    let mut choice = vec![top; model.num_choice_states()];
    for iteration in 1..=max_iterations {
        let (gain, bias) = evaluate_policy(model, &choice, reference)?;
        let mut changed = false;
        for (i, current) in choice.iter_mut().enumerate() {
            let s = model.choice_state(i);
            let ve = model.kernel.expect(s, Action::ExitEarly, &bias);
            let vc = model.kernel.expect(s, Action::ContinueFull, &bias);
            let q = |g: usize| {
                let f = model.exit_prob[g];
                model.reward[g] + f * ve + (1.0 - f) * vc
            };
            let best = (0..model.grid.len()).map(q).fold(f64::NEG_INFINITY, f64::max);
            let tol = TIE_TOL * best.abs().max(1.0);
            if q(*current) >= best - tol {
                continue;
            }
            let pick = (0..model.grid.len())
                .rev()
                .find(|&g| q(g) >= best - tol)
                .expect("maximum is attained");
            *current = pick;
            changed = true;
        }
        if !changed {
            return Ok(PiSolution {
                policy: model.policy_from_choice(&choice),
                choice,
                gain,
                bias,
                iterations: iteration,
            });
        }
    }
    Err(Error::IterationLimit(max_iterations))
}
