//! Combinatorial optimization problems viewed as sequential decision
//! processes.
//!
//! A problem is broken into a sequence of decisions. Each state names the
//! next variable to assign, an action assigns it a value, and every action
//! charges the increase it causes in the objective, so the costs of a
//! complete decision sequence add up to the objective value of the solution.
//!
//! Policies are run strictly forward: no look-ahead, no backtracking.

use std::fmt;

use crate::error::{Error, Result};

/// A problem exposed as states, actions, transitions and per-step costs,
/// together with the state-wise optimal action.
///
/// Implementations are immutable after construction, so rollouts over a
/// shared process may run concurrently.
pub trait DecisionProcess {
    type State: Clone;
    type Action: Copy + PartialEq + fmt::Debug;

    fn initial_state(&self) -> Self::State;

    /// Actions allowed in `state`, in a fixed order. Non-empty for every
    /// non-terminal state.
    fn valid_actions(&self, state: &Self::State) -> Vec<Self::Action>;

    fn transition(&self, state: &Self::State, action: Self::Action) -> Self::State;

    /// Objective increase caused by taking `action` in `state`. Nonnegative.
    fn cost(&self, state: &Self::State, action: Self::Action) -> f64;

    fn is_terminal(&self, state: &Self::State) -> bool;

    /// Position of the variable `state` is about to assign, or `None` for the
    /// terminal state.
    fn step_index(&self, state: &Self::State) -> Option<usize>;

    /// The first action of an optimal completion of `state`. Always a member
    /// of `valid_actions(state)`.
    fn optimal_action(&self, state: &Self::State) -> Result<Self::Action>;
}

/// One recorded decision of a rollout.
#[derive(Debug, Clone, PartialEq)]
pub struct Decision<A> {
    /// Position in the variable order.
    pub step: usize,
    pub action: A,
    pub cost: f64,
    /// Whether the action was the state-optimal one. Forced moves count as
    /// optimal.
    pub was_optimal: bool,
    /// The state offered exactly one valid action.
    pub forced: bool,
}

/// A complete decision trace.
#[derive(Debug, Clone, PartialEq)]
pub struct Rollout<A> {
    pub decisions: Vec<Decision<A>>,
    pub total_cost: f64,
}

impl<A> Rollout<A> {
    pub fn len(&self) -> usize {
        self.decisions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.decisions.is_empty()
    }

    pub fn optimal_decisions(&self) -> usize {
        self.decisions.iter().filter(|d| d.was_optimal).count()
    }

    pub fn forced_decisions(&self) -> usize {
        self.decisions.iter().filter(|d| d.forced).count()
    }

    pub fn actions(&self) -> impl Iterator<Item = &A> + '_ {
        self.decisions.iter().map(|d| &d.action)
    }
}

/// Runs `policy` from the initial state until the process terminates and
/// records every decision.
///
/// Fails if the policy returns an action outside `valid_actions` of the
/// current state; the error names the offending step.
pub fn run_policy<P, F>(process: &P, mut policy: F) -> Result<Rollout<P::Action>>
where
    P: DecisionProcess,
    F: FnMut(&P::State) -> P::Action,
{
    try_run_policy(process, |s| Ok(policy(s)))
}

/// [`run_policy`] for policies that can fail.
pub fn try_run_policy<P, F>(process: &P, mut policy: F) -> Result<Rollout<P::Action>>
where
    P: DecisionProcess,
    F: FnMut(&P::State) -> Result<P::Action>,
{
    let mut state = process.initial_state();
    let mut decisions = Vec::new();
    let mut total_cost = 0.0;

    while !process.is_terminal(&state) {
        let step = process.step_index(&state).unwrap_or(decisions.len());
        let valid = process.valid_actions(&state);
        let action = policy(&state)?;
        if !valid.contains(&action) {
            return Err(Error::InvalidAction {
                step,
                action: format!("{action:?}"),
            });
        }
        let forced = valid.len() == 1;
        let was_optimal = forced || process.optimal_action(&state)? == action;
        let cost = process.cost(&state, action);
        total_cost += cost;
        decisions.push(Decision {
            step,
            action,
            cost,
            was_optimal,
            forced,
        });
        state = process.transition(&state, action);
    }

    Ok(Rollout {
        decisions,
        total_cost,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Picks one of `choices` values per variable; cost is the chosen value.
    struct Knapsackish {
        choices: Vec<Vec<u32>>,
    }

    impl DecisionProcess for Knapsackish {
        type State = usize;
        type Action = u32;

        fn initial_state(&self) -> usize {
            0
        }
        fn valid_actions(&self, s: &usize) -> Vec<u32> {
            self.choices[*s].clone()
        }
        fn transition(&self, s: &usize, _a: u32) -> usize {
            s + 1
        }
        fn cost(&self, _s: &usize, a: u32) -> f64 {
            f64::from(a)
        }
        fn is_terminal(&self, s: &usize) -> bool {
            *s == self.choices.len()
        }
        fn step_index(&self, s: &usize) -> Option<usize> {
            (*s < self.choices.len()).then_some(*s)
        }
        fn optimal_action(&self, s: &usize) -> Result<u32> {
            Ok(*self.choices[*s].iter().min().unwrap())
        }
    }

    #[test]
    fn single_forced_decision() {
        let p = Knapsackish {
            choices: vec![vec![3]],
        };
        let r = run_policy(&p, |_| 3).unwrap();
        assert_eq!(r.len(), 1);
        assert!(r.decisions[0].was_optimal);
        assert!(r.decisions[0].forced);
        assert_eq!(r.total_cost, 3.0);
    }

    #[test]
    fn flags_suboptimal_choices() {
        let p = Knapsackish {
            choices: vec![vec![1, 2], vec![5, 4], vec![7]],
        };
        let r = run_policy(&p, |s| p.choices[*s][0]).unwrap();
        let flags: Vec<bool> = r.decisions.iter().map(|d| d.was_optimal).collect();
        assert_eq!(flags, [true, false, true]);
        assert_eq!(r.total_cost, 13.0);
        assert_eq!(r.optimal_decisions(), 2);
        assert_eq!(r.forced_decisions(), 1);
    }

    #[test]
    fn invalid_action_names_step() {
        let p = Knapsackish {
            choices: vec![vec![1, 2], vec![5, 4]],
        };
        let err = run_policy(&p, |s| if *s == 1 { 9 } else { 1 }).unwrap_err();
        match err {
            Error::InvalidAction { step, .. } => assert_eq!(step, 1),
            other => panic!("unexpected error {other}"),
        }
    }
}
