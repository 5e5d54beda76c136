use std::time::Instant;

use super::{finish_improvement, SearchResult, IMPROVEMENT_THRESHOLD};
use crate::tsp::{Tour, TspInstance};

/// How the two middle segments `B = order[i+1..=j]` and
/// `C = order[j+1..=k]` are put back between `order[..=i]` and
/// `order[k+1..]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Reconnection {
    /// `B' C`
    ReverseFirst,
    /// `B C'`
    ReverseSecond,
    /// `B' C'`
    ReverseBoth,
    /// `C B`
    Swap,
    /// `C' B`
    SwapReverseFirst,
    /// `C B'`
    SwapReverseSecond,
    /// `C' B'`, the reversal of the whole block.
    SwapReverseBoth,
}

pub(crate) const RECONNECTIONS: [Reconnection; 7] = [
    Reconnection::ReverseFirst,
    Reconnection::ReverseSecond,
    Reconnection::ReverseBoth,
    Reconnection::Swap,
    Reconnection::SwapReverseFirst,
    Reconnection::SwapReverseSecond,
    Reconnection::SwapReverseBoth,
];

/// Cost of the three new edges for reconnection `r`, where
/// `a = order[i]`, `b..c` is B, `d..e` is C and `f = order[k+1]`.
#[inline]
fn added(instance: &TspInstance, r: Reconnection, [a, b, c, d, e, f]: [usize; 6]) -> f64 {
    let dist = |x, y| instance.dist(x, y);
    match r {
        Reconnection::ReverseFirst => dist(a, c) + dist(b, d) + dist(e, f),
        Reconnection::ReverseSecond => dist(a, b) + dist(c, e) + dist(d, f),
        Reconnection::ReverseBoth => dist(a, c) + dist(b, e) + dist(d, f),
        Reconnection::Swap => dist(a, d) + dist(e, b) + dist(c, f),
        Reconnection::SwapReverseFirst => dist(a, e) + dist(d, b) + dist(c, f),
        Reconnection::SwapReverseSecond => dist(a, d) + dist(e, c) + dist(b, f),
        Reconnection::SwapReverseBoth => dist(a, e) + dist(d, c) + dist(b, f),
    }
}

fn apply(order: &mut [usize], r: Reconnection, i: usize, j: usize, k: usize) {
    let b: Vec<usize> = order[i + 1..=j].to_vec();
    let c: Vec<usize> = order[j + 1..=k].to_vec();
    let rev = |s: &[usize]| s.iter().rev().copied().collect::<Vec<_>>();
    let (first, second) = match r {
        Reconnection::ReverseFirst => (rev(&b), c),
        Reconnection::ReverseSecond => (b, rev(&c)),
        Reconnection::ReverseBoth => (rev(&b), rev(&c)),
        Reconnection::Swap => (c, b),
        Reconnection::SwapReverseFirst => (rev(&c), b),
        Reconnection::SwapReverseSecond => (c, rev(&b)),
        Reconnection::SwapReverseBoth => (rev(&c), rev(&b)),
    };
    let mid = &mut order[i + 1..=k];
    mid[..first.len()].copy_from_slice(&first);
    mid[first.len()..].copy_from_slice(&second);
}

/// First-improvement 3-OPT in place over every triple `i < j < k` and all
/// seven reconnections, which include the 2-opt moves. Returns the number of
/// moves applied.
pub(crate) fn three_opt_in_place(instance: &TspInstance, order: &mut [usize]) -> usize {
    let n = order.len();
    if n < 4 {
        return 0;
    }
    let mut moves = 0;
    loop {
        let mut improved = false;
        for i in 0..n - 2 {
            for j in (i + 1)..n - 1 {
                for k in (j + 1)..n {
                    let ends = [
                        order[i],
                        order[i + 1],
                        order[j],
                        order[j + 1],
                        order[k],
                        order[(k + 1) % n],
                    ];
                    let [a, b, c, d, e, f] = ends;
                    let removed = instance.dist(a, b) + instance.dist(c, d) + instance.dist(e, f);
                    for r in RECONNECTIONS {
                        if added(instance, r, ends) < removed - IMPROVEMENT_THRESHOLD {
                            apply(order, r, i, j, k);
                            moves += 1;
                            improved = true;
                            break;
                        }
                    }
                }
            }
        }
        if !improved {
            return moves;
        }
    }
}

/// Improves `tour` until it is 3-opt locally optimal.
pub fn three_opt(instance: &TspInstance, tour: &Tour) -> SearchResult {
    let clock = Instant::now();
    let mut order = tour.order().to_vec();
    let moves = three_opt_in_place(instance, &mut order);
    finish_improvement(instance, tour, order, "3opt", moves, clock)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tsp::{cyclic_cost, validate_permutation};

    #[test]
    fn every_reconnection_matches_its_recomputed_cost() {
        let inst = TspInstance::generate(12, 17).unwrap();
        let base: Vec<usize> = (0..12).collect();
        let before = cyclic_cost(&inst, &base);
        for (i, j, k) in [(0, 3, 7), (2, 3, 11), (0, 1, 11), (4, 8, 9)] {
            let ends = [
                base[i],
                base[i + 1],
                base[j],
                base[j + 1],
                base[k],
                base[(k + 1) % 12],
            ];
            let [a, b, c, d, e, f] = ends;
            let removed = inst.dist(a, b) + inst.dist(c, d) + inst.dist(e, f);
            for r in RECONNECTIONS {
                let mut order = base.clone();
                apply(&mut order, r, i, j, k);
                validate_permutation(12, &order).unwrap();
                let after = cyclic_cost(&inst, &order);
                let predicted = before - removed + added(&inst, r, ends);
                assert!((after - predicted).abs() < 1e-12, "{r:?} at {i},{j},{k}");
            }
        }
    }

    #[test]
    fn fixed_point_and_monotone() {
        let inst = TspInstance::generate(25, 8).unwrap();
        let start = Tour::new(&inst, (0..25).collect()).unwrap();
        let r = three_opt(&inst, &start);
        assert!(r.tour.cost() < start.cost());
        let again = three_opt(&inst, &r.tour);
        assert_eq!(again.moves, 0);
        assert_eq!(again.tour, r.tour);
    }
}
