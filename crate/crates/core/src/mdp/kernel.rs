use crate::controllers::Action;
use crate::energy::{Condition, EnergyParams, SystemState};

/// Transition rows `P(s' | s, a)` for every state and primitive action.
///
/// Rows are dense over the `2 (b_max + 1)` states. An action is present only
/// where the battery can pay for it.
#[derive(Debug, Clone)]
pub struct Kernel {
    num_states: usize,
    // [discard, exit, continue] per state
    rows: Vec<[Option<Vec<f64>>; 3]>,
}

fn slot(action: Action) -> usize {
    match action {
        Action::Discard => 0,
        Action::ExitEarly => 1,
        Action::ContinueFull => 2,
        Action::FreeGuess => panic!("free guess has no transition row in the MDP"),
    }
}

impl Kernel {
    pub fn num_states(&self) -> usize {
        self.num_states
    }

    /// Row for `(state, action)`, or `None` if the action is unaffordable.
    pub fn row(&self, state: usize, action: Action) -> Option<&[f64]> {
        self.rows[state][slot(action)].as_deref()
    }

    /// Expected value of `v` after taking `action` in `state`.
    pub fn expect(&self, state: usize, action: Action, v: &[f64]) -> f64 {
        self.row(state, action)
            .expect("action must be affordable")
            .iter()
            .zip(v)
            .map(|(p, x)| p * x)
            .sum()
    }
}

pub fn build_transition_kernel(params: &EnergyParams) -> Kernel {
    let n = params.num_states();
    let mut rows = Vec::with_capacity(n);
    for idx in 0..n {
        let s = SystemState::from_index(idx);
        let mut per_action: [Option<Vec<f64>>; 3] = [None, None, None];
        for (k, (action, cost)) in [
            (Action::Discard, 0),
            (Action::ExitEarly, params.u_exit),
            (Action::ContinueFull, params.u_continue),
        ]
        .into_iter()
        .enumerate()
        {
            if cost > s.b {
                continue;
            }
            debug_assert_eq!(slot(action), k);
            let mut row = vec![0.0; n];
            for h_next in Condition::ALL {
                let p_h = params.source_transition(s.h, h_next);
                if p_h == 0.0 {
                    continue;
                }
                for w in 0..=2u32 {
                    let p_w = params.arrival_prob(h_next, w);
                    if p_w == 0.0 {
                        continue;
                    }
                    let b_next = (s.b - cost + w).min(params.b_max);
                    row[SystemState::new(b_next, h_next).index()] += p_h * p_w;
                }
            }
            per_action[k] = Some(row);
        }
        rows.push(per_action);
    }
    Kernel { num_states: n, rows }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_battery_exit_mass() {
        let p = EnergyParams::default();
        let k = build_transition_kernel(&p);
        let s = SystemState::new(50, Condition::Good).index();
        let row = k.row(s, Action::ExitEarly).unwrap();
        let target = SystemState::new(50, Condition::Good).index();
        assert!((row[target] - 0.81).abs() < 1e-12);
        assert!((row[SystemState::new(49, Condition::Good).index()] - 0.09).abs() < 1e-12);
        assert!((row[SystemState::new(49, Condition::Bad).index()] - 0.1).abs() < 1e-12);
    }

    #[test]
    fn dead_source_depletion_is_absorbing() {
        let p = EnergyParams {
            p_bad: 1.0,
            ..Default::default()
        };
        let k = build_transition_kernel(&p);
        let s = SystemState::new(0, Condition::Bad).index();
        let row = k.row(s, Action::Discard).unwrap();
        assert_eq!(row[s], 1.0);
        assert!(k.row(s, Action::ExitEarly).is_none());
    }

    #[test]
    fn rows_are_stochastic_and_affordable() {
        let p = EnergyParams {
            b_max: 12,
            u_exit: 2,
            u_continue: 5,
            ..Default::default()
        };
        let k = build_transition_kernel(&p);
        for idx in 0..k.num_states() {
            let b = SystemState::from_index(idx).b;
            for (a, cost) in [(Action::Discard, 0), (Action::ExitEarly, 2), (Action::ContinueFull, 5)] {
                match k.row(idx, a) {
                    Some(row) => {
                        assert!(cost <= b);
                        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-10);
                    }
                    None => assert!(cost > b),
                }
            }
        }
    }
}
