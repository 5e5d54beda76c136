use std::time::Instant;

use super::{finish_improvement, SearchResult, IMPROVEMENT_THRESHOLD};
use crate::tsp::{Tour, TspInstance};

/// Cost change from reversing `order[i+1..=j]`.
#[inline]
fn delta(instance: &TspInstance, order: &[usize], i: usize, j: usize) -> f64 {
    let n = order.len();
    let (a, b) = (order[i], order[i + 1]);
    let (c, d) = (order[j], order[(j + 1) % n]);
    instance.dist(a, c) + instance.dist(b, d) - instance.dist(a, b) - instance.dist(c, d)
}

/// First-improvement 2-OPT in place. Scans `(i, j)` lexicographically,
/// applying every exchange that shortens the tour by more than
/// [`IMPROVEMENT_THRESHOLD`], until a full pass finds none. Returns the
/// number of exchanges applied.
pub(crate) fn two_opt_in_place(instance: &TspInstance, order: &mut [usize]) -> usize {
    let n = order.len();
    if n < 4 {
        return 0;
    }
    let mut moves = 0;
    loop {
        let mut improved = false;
        for i in 0..n - 2 {
            for j in (i + 2)..n {
                // Edges (0, 1) and (n-1, 0) share vertex order[0].
                if i == 0 && j == n - 1 {
                    continue;
                }
                if delta(instance, order, i, j) < -IMPROVEMENT_THRESHOLD {
                    order[i + 1..=j].reverse();
                    moves += 1;
                    improved = true;
                }
            }
        }
        if !improved {
            return moves;
        }
    }
}

/// Improves `tour` until it is 2-opt locally optimal.
pub fn two_opt(instance: &TspInstance, tour: &Tour) -> SearchResult {
    let clock = Instant::now();
    let mut order = tour.order().to_vec();
    let moves = two_opt_in_place(instance, &mut order);
    finish_improvement(instance, tour, order, "2opt", moves, clock)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::brute_force;
    use crate::search::nearest_neighbour;

    #[test]
    fn removes_a_crossing() {
        let inst =
            TspInstance::from_coords(vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]).unwrap();
        let crossing = Tour::new(&inst, vec![0, 2, 1, 3]).unwrap();
        let r = two_opt(&inst, &crossing);
        assert_eq!(r.moves, 1);
        assert_eq!(r.tour.cost(), 4.0);
        assert_eq!(r.tour.cost(), brute_force(&inst).unwrap().cost);
    }

    #[test]
    fn fixed_point_is_unchanged() {
        let inst = TspInstance::generate(30, 6).unwrap();
        let start = nearest_neighbour(&inst, 0).unwrap().tour;
        let once = two_opt(&inst, &start);
        let twice = two_opt(&inst, &once.tour);
        assert_eq!(twice.moves, 0);
        assert_eq!(twice.tour, once.tour);
        assert!(once.tour.cost() <= start.cost());
    }
}
