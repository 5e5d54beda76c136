//! Tour construction from edge heatmaps and local-search improvement.

use std::time::{Duration, Instant};

use crate::tsp::{Tour, TspInstance};

mod construct;
mod heatmap;
mod lk;
mod three_opt;
mod two_opt;

pub use construct::{beam_search, greedy_decode, nearest_neighbour, sampling_decode, LOG_FLOOR};
pub use heatmap::{Heatmap, HeatmapFile};
pub use lk::{lin_kernighan, multi_start_lk, neighbor_lists, LkParams};
pub use three_opt::three_opt;
pub use two_opt::two_opt;

/// A move must shorten the tour by more than this to be applied.
pub const IMPROVEMENT_THRESHOLD: f64 = 1e-10;

/// Output of any construction or improvement procedure.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    pub tour: Tour,
    /// Short tag such as `"greedy"` or `"2opt"`.
    pub procedure: String,
    /// Improving moves applied; 0 for constructions.
    pub moves: usize,
    pub elapsed: Duration,
}

impl SearchResult {
    pub fn new(tour: Tour, procedure: impl Into<String>, moves: usize, elapsed: Duration) -> Self {
        Self {
            tour,
            procedure: procedure.into(),
            moves,
            elapsed,
        }
    }
}

/// Wraps an improved order. Floating-point summation order can make a
/// sequence of improving moves look marginally worse when the cost is
/// recomputed from scratch; the input is returned in that case.
fn finish_improvement(
    instance: &TspInstance,
    input: &Tour,
    order: Vec<usize>,
    tag: &str,
    moves: usize,
    clock: Instant,
) -> SearchResult {
    let tour = Tour::new_unchecked(instance, order);
    let tour = if tour.cost() > input.cost() {
        input.clone()
    } else {
        tour
    };
    SearchResult::new(tour, tag, moves, clock.elapsed())
}
