//! Optimality gaps and the ratio of optimal decisions (ROD).
//!
//! The ROD of a model is the smallest oracle accuracy `alpha` whose average
//! optimality gap on a dataset is no worse than the model's. It is found by
//! scanning `alpha = 0, k, 2k, ...` upward; at each grid point the oracle is
//! rolled out on every instance and the dataset gap is formed as a ratio of
//! sums:
//!
//! ```text
//! gap = 1 - Σ c* / Σ c
//! ```
//!
//! where `c*` is the perfect oracle's cost (`alpha = 1`). The scan stops at
//! the first grid point where the oracle gap is at most the model gap; the
//! grid always ends at `alpha = 1`, where the oracle gap is zero.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cop::{DecisionProcess, Rollout};
use crate::error::{Error, Result};
use crate::oracle::{run_oracle, OracleConfig};
use crate::seed::derive_seed;

/// Relative tolerance for a model cost dipping below its reference.
pub const BELOW_OPTIMUM_TOLERANCE: f64 = 1e-9;

/// Slack in the "oracle gap ≤ model gap" comparison, absorbing summation
/// order differences between tour costs and rollout costs.
pub const GAP_COMPARISON_TOLERANCE: f64 = 1e-12;

/// How per-instance costs are combined into a dataset gap.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GapAggregation {
    /// `1 - Σc*/Σc`.
    #[default]
    RatioOfSums,
    /// Mean over instances of `1 - c*_i/c_i`.
    MeanOfRatios,
}

/// What to do with model costs below their reference.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReferenceCheck {
    /// References are optima; a cheaper model cost is an error.
    Strict,
    /// References are best-known costs and may be beaten.
    BestKnown,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InstanceCosts {
    pub model: f64,
    pub reference: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub dataset_id: String,
    pub instances: Vec<InstanceCosts>,
    /// `1 - Σc*/Σc`.
    pub gap: f64,
    /// `(Σc - Σc*)/Σc*`.
    pub classical_gap: f64,
    /// Mean of per-instance `1 - c*/c`.
    pub mean_instance_gap: f64,
}

impl GapReport {
    pub fn aggregated(&self, aggregation: GapAggregation) -> f64 {
        match aggregation {
            GapAggregation::RatioOfSums => self.gap,
            GapAggregation::MeanOfRatios => self.mean_instance_gap,
        }
    }

    pub fn with_dataset_id(mut self, id: impl Into<String>) -> Self {
        self.dataset_id = id.into();
        self
    }
}

/// Dataset gaps of `model` against optimal `reference` costs. Sums first,
/// then forms the ratio.
pub fn aggregate_gap(model: &[f64], reference: &[f64]) -> Result<GapReport> {
    aggregate_gap_with(model, reference, ReferenceCheck::Strict)
}

pub fn aggregate_gap_with(
    model: &[f64],
    reference: &[f64],
    check: ReferenceCheck,
) -> Result<GapReport> {
    if model.len() != reference.len() {
        return Err(Error::LengthMismatch {
            model: model.len(),
            reference: reference.len(),
        });
    }
    if model.is_empty() {
        return Err(Error::Empty("no costs to aggregate"));
    }
    for (index, (&m, &r)) in model.iter().zip(reference).enumerate() {
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::NonPositiveReference { index, cost: r });
        }
        if !m.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "model cost of instance {index} is not finite"
            )));
        }
        if check == ReferenceCheck::Strict && m < r * (1.0 - BELOW_OPTIMUM_TOLERANCE) {
            return Err(Error::BeatsOptimum {
                index,
                model: m,
                reference: r,
            });
        }
    }
    let sum_model: f64 = model.iter().sum();
    let sum_ref: f64 = reference.iter().sum();
    let mean_instance_gap = model
        .iter()
        .zip(reference)
        .map(|(m, r)| 1.0 - r / m)
        .sum::<f64>()
        / model.len() as f64;
    Ok(GapReport {
        dataset_id: String::new(),
        instances: model
            .iter()
            .zip(reference)
            .map(|(&model, &reference)| InstanceCosts { model, reference })
            .collect(),
        gap: 1.0 - sum_ref / sum_model,
        classical_gap: (sum_model - sum_ref) / sum_ref,
        mean_instance_gap,
    })
}

/// One instance of a ROD dataset.
#[derive(Debug, Clone)]
pub struct RodCase<P> {
    pub id: String,
    pub process: P,
    /// Known optimum; required for every case.
    pub reference_cost: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RodOptions {
    /// Grid step for `alpha`.
    pub k: f64,
    pub aggregation: GapAggregation,
}

impl Default for RodOptions {
    fn default() -> Self {
        Self {
            k: 0.001,
            aggregation: GapAggregation::RatioOfSums,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub alpha: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RodReport {
    pub dataset_id: String,
    /// The ROD: first grid point whose oracle gap is at most the model gap.
    pub alpha: f64,
    pub k: f64,
    pub seed: u64,
    pub rollouts_per_instance: usize,
    pub aggregation: GapAggregation,
    pub model_gap: f64,
    pub model_classical_gap: f64,
    /// Oracle gap at every grid point evaluated, in scan order.
    pub curve: Vec<CurvePoint>,
}

impl RodReport {
    /// The curve as CSV with header `alpha,gap`.
    pub fn curve_csv(&self) -> String {
        let mut out = String::from("alpha,gap\n");
        for p in &self.curve {
            writeln!(out, "{},{}", p.alpha, p.gap).unwrap();
        }
        out
    }
}

/// The `alpha` grid for step `k`: `0, k, 2k, ...`, ending exactly at 1.
pub fn alpha_grid(k: f64) -> Result<Vec<f64>> {
    if !(k > 0.0 && k <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "grid step k must lie in (0, 1], got {k}"
        )));
    }
    // Guard against 1/k landing a hair above an integer.
    let steps = ((1.0 / k) - 1e-9).ceil() as usize;
    Ok((0..=steps).map(|i| (i as f64 * k).min(1.0)).collect())
}

/// Stream seed for one grid point. Keyed by the `alpha` value, so grids of
/// different step share the streams of the points they have in common.
pub fn grid_point_seed(seed: u64, alpha: f64) -> u64 {
    derive_seed(seed, &[(alpha * 1e9).round() as u64])
}

/// Mean oracle cost per case at one `alpha`, in case order.
pub fn oracle_costs<P>(cases: &[RodCase<P>], config: &OracleConfig) -> Result<Vec<f64>>
where
    P: DecisionProcess + Sync,
{
    cases
        .par_iter()
        .map(|c| run_oracle(&c.process, &c.id, config).map(|o| o.mean_cost))
        .collect()
}

/// Scans `alpha` upward until the oracle's dataset gap reaches the model's.
///
/// `model_costs[i]` is the model's cost on `cases[i]`. The perfect-oracle
/// costs serve as `c*`. `config.alpha` is ignored; the other oracle settings
/// apply at every grid point, each with its own seeded streams.
pub fn compute_rod<P>(
    cases: &[RodCase<P>],
    model_costs: &[f64],
    config: &OracleConfig,
    options: &RodOptions,
) -> Result<RodReport>
where
    P: DecisionProcess + Sync,
{
    let grid = alpha_grid(options.k)?;
    config.validate()?;
    let missing: Vec<String> = cases
        .iter()
        .filter(|c| c.reference_cost.is_none())
        .map(|c| c.id.clone())
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingReferences(missing));
    }
    if cases.is_empty() {
        return Err(Error::Empty("ROD needs at least one instance"));
    }

    let perfect = OracleConfig {
        alpha: 1.0,
        rollouts_per_instance: 1,
        keep_traces: false,
        ..config.clone()
    };
    let optimal = oracle_costs(cases, &perfect)?;
    let model = aggregate_gap(model_costs, &optimal)?;
    let model_gap = model.aggregated(options.aggregation);

    let mut curve = Vec::new();
    let mut found = None;
    for &alpha in &grid {
        let point = OracleConfig {
            alpha,
            seed: grid_point_seed(config.seed, alpha),
            keep_traces: false,
            ..config.clone()
        };
        let costs = oracle_costs(cases, &point)?;
        let gap = aggregate_gap(&costs, &optimal)?.aggregated(options.aggregation);
        curve.push(CurvePoint { alpha, gap });
        log::debug!("alpha {alpha:.4}: oracle gap {gap:.6}, model gap {model_gap:.6}");
        if gap <= model_gap + GAP_COMPARISON_TOLERANCE {
            found = Some(alpha);
            break;
        }
    }

    Ok(RodReport {
        dataset_id: String::new(),
        alpha: found.unwrap_or(1.0),
        k: options.k,
        seed: config.seed,
        rollouts_per_instance: config.rollouts_per_instance,
        aggregation: options.aggregation,
        model_gap,
        model_classical_gap: model.classical_gap,
        curve,
    })
}

/// Fraction of decisions that were optimal, over all traces. Forced moves
/// count as optimal decisions.
pub fn decision_accuracy<A>(traces: &[Rollout<A>]) -> Result<f64> {
    let total: usize = traces.iter().map(Rollout::len).sum();
    if total == 0 {
        return Err(Error::Empty("no decisions to score"));
    }
    let optimal: usize = traces.iter().map(Rollout::optimal_decisions).sum();
    Ok(optimal as f64 / total as f64)
}
