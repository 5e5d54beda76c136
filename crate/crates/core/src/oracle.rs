//! The parametrized oracle.
//!
//! At each state the oracle takes the state-optimal action with probability
//! `alpha`. Otherwise it samples among the remaining actions with
//! probability proportional to the inverse of their step cost, so cheap
//! mistakes are more likely than expensive ones:
//!
//! ```text
//! P(a) = K(s, a)^-1 / Σ_a' K(s, a')^-1
//! ```
//!
//! Rollouts never look ahead and never undo a decision.

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;

use crate::cop::{try_run_policy, DecisionProcess, Rollout};
use crate::error::{Error, Result};
use crate::seed::{fnv1a, stream};

#[derive(Debug, Clone, PartialEq)]
pub struct OracleConfig {
    /// Probability of taking the optimal action at an unforced state.
    pub alpha: f64,
    pub rollouts_per_instance: usize,
    pub seed: u64,
    /// Sample the sub-optimal branch from the valid actions minus the
    /// optimal one (when another action exists). When false the optimal
    /// action stays in the sampling pool.
    pub exclude_optimal_in_sampling: bool,
    /// Lower clamp on step costs before inversion.
    pub epsilon_cost: f64,
    /// Keep the full decision traces in the outcome.
    pub keep_traces: bool,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            rollouts_per_instance: 1,
            seed: 0,
            exclude_optimal_in_sampling: true,
            epsilon_cost: 1e-12,
            keep_traces: false,
        }
    }
}

impl OracleConfig {
    pub fn with_alpha(alpha: f64) -> Self {
        Self {
            alpha,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::InvalidParameter(format!(
                "alpha must lie in [0, 1], got {}",
                self.alpha
            )));
        }
        if self.rollouts_per_instance == 0 {
            return Err(Error::InvalidParameter(
                "rollouts_per_instance must be positive".into(),
            ));
        }
        if !(self.epsilon_cost > 0.0 && self.epsilon_cost.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "epsilon_cost must be positive, got {}",
                self.epsilon_cost
            )));
        }
        Ok(())
    }
}

/// Inverse-cost sampling probabilities, costs clamped below at `epsilon`.
pub fn inverse_cost_probabilities(costs: &[f64], epsilon: f64) -> Vec<f64> {
    let weights: Vec<f64> = costs.iter().map(|&c| 1.0 / c.max(epsilon)).collect();
    let total: f64 = weights.iter().sum();
    weights.into_iter().map(|w| w / total).collect()
}

/// Draws an index into `costs` with inverse-cost probabilities.
///
/// # Panics
///
/// If `costs` is empty.
pub fn sample_suboptimal<R: Rng + ?Sized>(costs: &[f64], epsilon: f64, rng: &mut R) -> usize {
    assert!(!costs.is_empty(), "no candidate actions to sample from");
    if costs.len() == 1 {
        return 0;
    }
    let weights = costs.iter().map(|&c| 1.0 / c.max(epsilon));
    WeightedIndex::new(weights)
        .expect("clamped inverse costs are positive and finite")
        .sample(rng)
}

/// The oracle policy bound to one process.
pub struct ParametrizedOracle<'a, P> {
    process: &'a P,
    config: &'a OracleConfig,
}

impl<'a, P: DecisionProcess> ParametrizedOracle<'a, P> {
    pub fn new(process: &'a P, config: &'a OracleConfig) -> Self {
        Self { process, config }
    }

    /// Candidates of the sub-optimal branch at `state`, with their step costs.
    pub fn sampling_candidates(&self, state: &P::State) -> Result<Vec<(P::Action, f64)>> {
        let mut actions = self.process.valid_actions(state);
        if actions.is_empty() {
            return Err(Error::TerminalState);
        }
        if self.config.exclude_optimal_in_sampling && actions.len() > 1 {
            let best = self.process.optimal_action(state)?;
            actions.retain(|&a| a != best);
        }
        Ok(actions
            .into_iter()
            .map(|a| (a, self.process.cost(state, a)))
            .collect())
    }

    /// The sub-optimal branch's distribution at `state`.
    pub fn sampling_distribution(&self, state: &P::State) -> Result<Vec<(P::Action, f64)>> {
        let candidates = self.sampling_candidates(state)?;
        let costs: Vec<f64> = candidates.iter().map(|&(_, c)| c).collect();
        let probs = inverse_cost_probabilities(&costs, self.config.epsilon_cost);
        Ok(candidates.into_iter().map(|(a, _)| a).zip(probs).collect())
    }

    /// Draws the oracle's action at `state`.
    ///
    /// A state with a single valid action returns it without consuming
    /// randomness. Otherwise `u ~ U[0, 1)` is drawn and the optimal action
    /// taken when `u < alpha`, which happens with probability exactly `alpha`.
    pub fn theta<R: Rng + ?Sized>(&self, state: &P::State, rng: &mut R) -> Result<P::Action> {
        let actions = self.process.valid_actions(state);
        match actions.len() {
            0 => return Err(Error::TerminalState),
            1 => return Ok(actions[0]),
            _ => {}
        }
        if rng.gen::<f64>() < self.config.alpha {
            return self.process.optimal_action(state);
        }
        let candidates = self.sampling_candidates(state)?;
        let costs: Vec<f64> = candidates.iter().map(|&(_, c)| c).collect();
        let pick = sample_suboptimal(&costs, self.config.epsilon_cost, rng);
        Ok(candidates[pick].0)
    }

    /// One rollout with the given generator.
    pub fn rollout<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Rollout<P::Action>> {
        try_run_policy(self.process, |s| self.theta(s, rng))
    }
}

/// Draws one oracle action at `state` with the config's `alpha`.
pub fn theta<P: DecisionProcess, R: Rng + ?Sized>(
    process: &P,
    state: &P::State,
    config: &OracleConfig,
    rng: &mut R,
) -> Result<P::Action> {
    ParametrizedOracle::new(process, config).theta(state, rng)
}

/// Result of running the oracle on one instance.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleOutcome<A> {
    pub instance_id: String,
    pub costs: Vec<f64>,
    pub mean_cost: f64,
    pub traces: Option<Vec<Rollout<A>>>,
}

/// Stream of rollout `rollout` on instance `instance_id`.
pub fn rollout_stream(seed: u64, instance_id: &str, rollout: usize) -> crate::seed::StreamRng {
    stream(seed, &[fnv1a(instance_id.as_bytes()), rollout as u64])
}

/// Runs `rollouts_per_instance` independent oracle rollouts. Each rollout
/// draws from its own stream derived from `(seed, instance_id, index)`.
pub fn run_oracle<P: DecisionProcess>(
    process: &P,
    instance_id: &str,
    config: &OracleConfig,
) -> Result<OracleOutcome<P::Action>> {
    config.validate()?;
    let oracle = ParametrizedOracle::new(process, config);
    let mut costs = Vec::with_capacity(config.rollouts_per_instance);
    let mut traces = config.keep_traces.then(Vec::new);
    for r in 0..config.rollouts_per_instance {
        let mut rng = rollout_stream(config.seed, instance_id, r);
        let rollout = oracle.rollout(&mut rng)?;
        costs.push(rollout.total_cost);
        if let Some(t) = traces.as_mut() {
            t.push(rollout);
        }
    }
    let mean_cost = costs.iter().sum::<f64>() / costs.len() as f64;
    Ok(OracleOutcome {
        instance_id: instance_id.to_string(),
        costs,
        mean_cost,
        traces,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tsp::{as_process, TspInstance, TspState};

    #[test]
    fn inverse_cost_two_candidates() {
        let p = inverse_cost_probabilities(&[1.0, 2.0], 1e-12);
        assert!((p[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((p[1] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn inverse_cost_equal_costs_is_uniform() {
        let p = inverse_cost_probabilities(&[0.4, 0.4, 0.4], 1e-12);
        for q in p {
            assert!((q - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_cost_is_clamped_and_dominates() {
        let p = inverse_cost_probabilities(&[0.0, 1.0], 1e-12);
        assert!(p.iter().all(|q| q.is_finite()));
        assert!(p[0] > 1.0 - 1e-11);
    }

    #[test]
    fn empirical_frequency_one_to_three() {
        let mut rng = stream(1, &[]);
        let draws = 100_000;
        let hits = (0..draws)
            .filter(|_| sample_suboptimal(&[1.0, 3.0], 1e-12, &mut rng) == 0)
            .count();
        let freq = hits as f64 / draws as f64;
        let se = (0.75f64 * 0.25 / draws as f64).sqrt();
        assert!((freq - 0.75).abs() < 3.0 * se, "freq {freq}");
    }

    #[test]
    fn config_validation() {
        assert!(OracleConfig::with_alpha(1.5).validate().is_err());
        assert!(OracleConfig {
            rollouts_per_instance: 0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(OracleConfig {
            epsilon_cost: 0.0,
            ..Default::default()
        }
        .validate()
        .is_err());
    }

    #[test]
    fn alpha_extremes() {
        let inst = TspInstance::generate(8, 3).unwrap();
        let p = as_process(&inst).unwrap();
        let state = TspState::from_path(&inst, &[2]).unwrap();
        let best = p.optimal_action(&state).unwrap();
        let mut rng = stream(5, &[]);

        let always = OracleConfig::with_alpha(1.0);
        let never = OracleConfig::with_alpha(0.0);
        for _ in 0..500 {
            assert_eq!(theta(&p, &state, &always, &mut rng).unwrap(), best);
            assert_ne!(theta(&p, &state, &never, &mut rng).unwrap(), best);
        }
    }

    #[test]
    fn literal_sampling_keeps_the_optimum() {
        let inst = TspInstance::generate(6, 3).unwrap();
        let p = as_process(&inst).unwrap();
        let state = p.initial_state();
        let cfg = OracleConfig {
            alpha: 0.0,
            exclude_optimal_in_sampling: false,
            ..Default::default()
        };
        let dist = ParametrizedOracle::new(&p, &cfg)
            .sampling_distribution(&state)
            .unwrap();
        assert_eq!(dist.len(), 5);
        let sum: f64 = dist.iter().map(|&(_, q)| q).sum();
        assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn perfect_oracle_is_optimal_and_seeded() {
        let inst = TspInstance::generate(11, 21).unwrap();
        let p = as_process(&inst).unwrap();
        let cfg = OracleConfig {
            alpha: 1.0,
            rollouts_per_instance: 3,
            keep_traces: true,
            ..Default::default()
        };
        let out = run_oracle(&p, "x", &cfg).unwrap();
        for c in &out.costs {
            assert!((c - p.optimal_cost()).abs() <= 1e-12 * p.optimal_cost());
        }
        for t in out.traces.as_ref().unwrap() {
            assert_eq!(t.optimal_decisions(), t.len());
        }

        let noisy = OracleConfig {
            alpha: 0.5,
            rollouts_per_instance: 4,
            seed: 9,
            keep_traces: true,
            ..Default::default()
        };
        let a = run_oracle(&p, "x", &noisy).unwrap();
        let b = run_oracle(&p, "x", &noisy).unwrap();
        assert_eq!(a, b);
        let mean = a.costs.iter().sum::<f64>() / 4.0;
        assert_eq!(a.mean_cost, mean);
    }
}
