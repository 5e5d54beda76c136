//! Lin–Kernighan variable-depth search.
//!
//! From a base vertex `t1` and its tour neighbour `t2`, the search grows a
//! chain of sequential exchanges: remove `(t1, t2)`, add `(t2, t3)` for a
//! near neighbour `t3` of `t2`, remove `(t3, t4)` where `t4` is the
//! neighbour of `t3` that lets the tour close with `(t4, t1)`, then repeat
//! from `t4`. Each step is realized as a segment reversal, so the working
//! tour is always a valid cycle. The chain only continues while the
//! cumulative gain (removed minus added, closing edge excluded) stays
//! positive. The best closed-up tour along the chain is kept if it improves.
//!
//! At the first level `t4` may also be the other tour neighbour of `t3`,
//! which only closes after a third exchange; this adds the sequential 3-opt
//! moves that relocate a segment. Candidates at the first two levels are
//! tried exhaustively (backtracking); deeper levels follow the single best
//! candidate. Removed edges are never
//! re-added and added edges never removed within a chain.

use std::time::Instant;

use rand::seq::SliceRandom;

use super::three_opt::three_opt_in_place;
use super::{finish_improvement, SearchResult, IMPROVEMENT_THRESHOLD};
use crate::error::{Error, Result};
use crate::seed::stream;
use crate::tsp::{Tour, TspInstance};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LkParams {
    /// Maximum number of edges exchanged in one move (k of a k-opt move).
    pub depth: usize,
    /// Size of each vertex's candidate list of nearest neighbours.
    pub neighbors: usize,
    /// Orders the base vertices.
    pub seed: u64,
}

impl Default for LkParams {
    fn default() -> Self {
        Self {
            depth: 5,
            neighbors: 5,
            seed: 0,
        }
    }
}

/// Levels that try every candidate before giving up.
const BACKTRACK_LEVELS: usize = 2;

/// `k` nearest other vertices of every vertex, closest first, lowest index
/// on ties.
pub fn neighbor_lists(instance: &TspInstance, k: usize) -> Vec<Vec<usize>> {
    let n = instance.n();
    (0..n)
        .map(|v| {
            let row = instance.row(v);
            let mut others: Vec<usize> = (0..n).filter(|&u| u != v).collect();
            others.sort_by(|&a, &b| row[a].total_cmp(&row[b]).then(a.cmp(&b)));
            others.truncate(k);
            others
        })
        .collect()
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Dir {
    Forward,
    Backward,
}

struct Search<'a> {
    instance: &'a TspInstance,
    neighbors: &'a [Vec<usize>],
    order: Vec<usize>,
    pos: Vec<usize>,
    max_level: usize,
    /// Position ranges reversed so far in the current chain.
    journal: Vec<(usize, usize)>,
    added: Vec<(usize, usize)>,
    removed: Vec<(usize, usize)>,
    best_gain: f64,
    best_len: usize,
}

fn edge(a: usize, b: usize) -> (usize, usize) {
    (a.min(b), a.max(b))
}

impl Search<'_> {
    fn n(&self) -> usize {
        self.order.len()
    }

    fn succ(&self, v: usize, dir: Dir) -> usize {
        let n = self.n();
        match dir {
            Dir::Forward => self.order[(self.pos[v] + 1) % n],
            Dir::Backward => self.order[(self.pos[v] + n - 1) % n],
        }
    }

    fn pred(&self, v: usize, dir: Dir) -> usize {
        match dir {
            Dir::Forward => self.succ(v, Dir::Backward),
            Dir::Backward => self.succ(v, Dir::Forward),
        }
    }

    /// Reverses the cyclic position range `from..=to`.
    fn reverse(&mut self, from: usize, to: usize) {
        let n = self.n();
        let len = (to + n - from) % n + 1;
        let (mut i, mut j) = (from, to);
        for _ in 0..len / 2 {
            self.order.swap(i, j);
            self.pos[self.order[i]] = i;
            self.pos[self.order[j]] = j;
            i = (i + 1) % n;
            j = (j + n - 1) % n;
        }
    }

    fn undo_to(&mut self, len: usize) {
        while self.journal.len() > len {
            let (from, to) = self.journal.pop().unwrap();
            self.reverse(from, to);
        }
    }

    /// Tries to improve the tour from base `t1` in direction `dir`.
    fn improve_from(&mut self, t1: usize, dir: Dir) -> bool {
        let t2 = self.succ(t1, dir);
        self.journal.clear();
        self.added.clear();
        self.removed.clear();
        self.removed.push(edge(t1, t2));
        self.best_gain = IMPROVEMENT_THRESHOLD;
        self.best_len = 0;
        let g = self.instance.dist(t1, t2);
        if self.extend(t1, dir, 1, g) {
            return true;
        }
        self.undo_to(0);
        false
    }

    /// One level of the chain. `gain` counts every removed edge, the current
    /// `(t1, succ(t1))` included, minus every added edge.
    fn extend(&mut self, t1: usize, dir: Dir, level: usize, gain: f64) -> bool {
        let t2 = self.succ(t1, dir);
        let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
        for &t3 in &self.neighbors[t2] {
            if t3 == t1 || t3 == self.succ(t2, dir) {
                continue;
            }
            let g1 = gain - self.instance.dist(t2, t3);
            if g1 <= 0.0 || self.removed.contains(&edge(t2, t3)) {
                continue;
            }
            let t4 = self.pred(t3, dir);
            if t4 == t2 || self.added.contains(&edge(t3, t4)) {
                continue;
            }
            candidates.push((
                self.instance.dist(t3, t4) - self.instance.dist(t2, t3),
                t3,
                t4,
            ));
        }
        candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        let breadth = if level <= BACKTRACK_LEVELS {
            candidates.len()
        } else {
            1
        };

        for &(_, t3, t4) in candidates.iter().take(breadth) {
            let mark = self.journal.len();
            // Reverse the path t2..t4 so the tour reads t1 t4 ... t2 t3.
            let (from, to) = match dir {
                Dir::Forward => (self.pos[t2], self.pos[t4]),
                Dir::Backward => (self.pos[t4], self.pos[t2]),
            };
            self.reverse(from, to);
            self.journal.push((from, to));
            self.added.push(edge(t2, t3));
            self.removed.push(edge(t3, t4));

            let g = gain - self.instance.dist(t2, t3) + self.instance.dist(t3, t4);
            let closed = g - self.instance.dist(t4, t1);
            if closed > self.best_gain {
                self.best_gain = closed;
                self.best_len = self.journal.len();
            }
            if level < self.max_level {
                self.extend(t1, dir, level + 1, g);
            }
            if self.best_len > 0 {
                self.undo_to(self.best_len);
                return true;
            }

            self.undo_to(mark);
            self.added.pop();
            self.removed.pop();
        }
        level == 1 && self.max_level >= 2 && self.alternate(t1, dir, gain)
    }

    /// Reverses the path from `x` to `y` read in direction `dir`.
    fn reverse_path(&mut self, x: usize, y: usize, dir: Dir) {
        let (from, to) = match dir {
            Dir::Forward => (self.pos[x], self.pos[y]),
            Dir::Backward => (self.pos[y], self.pos[x]),
        };
        self.reverse(from, to);
        self.journal.push((from, to));
    }

    /// The second choice of `t4` at the first level: `t4 = succ(t3)`, which
    /// cannot close on its own. A third exchange with `t5` on the path
    /// `t2..t3` restores a tour, giving the sequential 3-opt moves that move
    /// a segment.
    fn alternate(&mut self, t1: usize, dir: Dir, gain: f64) -> bool {
        let n = self.n();
        let t2 = self.succ(t1, dir);
        let offset = |s: &Self, v: usize| match dir {
            Dir::Forward => (s.pos[v] + n - s.pos[t2]) % n,
            Dir::Backward => (s.pos[t2] + n - s.pos[v]) % n,
        };
        let mut firsts: Vec<(f64, usize, usize)> = Vec::new();
        for &t3 in &self.neighbors[t2] {
            if t3 == t1 || t3 == self.succ(t2, dir) {
                continue;
            }
            let t4 = self.succ(t3, dir);
            if t4 == t1 || gain - self.instance.dist(t2, t3) <= 0.0 {
                continue;
            }
            firsts.push((
                self.instance.dist(t3, t4) - self.instance.dist(t2, t3),
                t3,
                t4,
            ));
        }
        firsts.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));

        for (_, t3, t4) in firsts {
            let g2 = gain - self.instance.dist(t2, t3) + self.instance.dist(t3, t4);
            let limit = offset(self, t3);
            for &t5 in &self.neighbors[t4] {
                if t5 == t1 || offset(self, t5) > limit {
                    continue;
                }
                let g = g2 - self.instance.dist(t4, t5);
                if g <= 0.0 {
                    continue;
                }
                for t6 in [self.succ(t5, dir), self.pred(t5, dir)] {
                    let segment_move = t6 == self.succ(t5, dir);
                    if (segment_move && t5 == t3) || (!segment_move && t5 == t2) {
                        continue;
                    }
                    let fresh = [edge(t2, t3), edge(t4, t5)];
                    let gone = [edge(t1, t2), edge(t3, t4), edge(t5, t6)];
                    if fresh.iter().any(|e| gone.contains(e)) {
                        continue;
                    }
                    let mark = self.journal.len();
                    if segment_move {
                        // t1 [t2..t5][t6..t3] t4  ->  t1 [t6..t3][t2..t5] t4
                        self.reverse_path(t2, t3, dir);
                        self.reverse_path(t3, t6, dir);
                        self.reverse_path(t5, t2, dir);
                    } else {
                        // t1 [t2..t6][t5..t3] t4  ->  t1 [t6..t2][t3..t5] t4
                        self.reverse_path(t2, t6, dir);
                        self.reverse_path(t5, t3, dir);
                    }
                    debug_assert_eq!(self.succ(t1, dir), t6);
                    self.added.extend(fresh);
                    self.removed.extend(&gone[1..]);

                    let g3 = g + self.instance.dist(t5, t6);
                    let closed = g3 - self.instance.dist(t6, t1);
                    if closed > self.best_gain {
                        self.best_gain = closed;
                        self.best_len = self.journal.len();
                    }
                    if self.max_level >= 3 {
                        self.extend(t1, dir, 3, g3);
                    }
                    if self.best_len > 0 {
                        self.undo_to(self.best_len);
                        return true;
                    }
                    self.undo_to(mark);
                    self.added.truncate(self.added.len() - 2);
                    self.removed.truncate(self.removed.len() - 2);
                }
            }
        }
        false
    }
}

/// Improves `tour` with Lin–Kernighan moves until no base vertex yields an
/// improving chain. Neighbour-list pruning can hide exchanges between
/// distant vertices, so each round ends with an exhaustive 3-OPT pass; the
/// result is 2-opt and 3-opt locally optimal.
pub fn lin_kernighan(
    instance: &TspInstance,
    tour: &Tour,
    params: LkParams,
) -> Result<SearchResult> {
    if params.depth < 2 {
        return Err(Error::InvalidParameter(format!(
            "LK depth limit must be at least 2, got {}",
            params.depth
        )));
    }
    if params.neighbors == 0 {
        return Err(Error::InvalidParameter(
            "LK needs at least one neighbour".into(),
        ));
    }
    let clock = Instant::now();
    let neighbors = neighbor_lists(instance, params.neighbors);
    let (order, moves) = lk_order(instance, tour.order().to_vec(), &neighbors, params);
    Ok(finish_improvement(
        instance, tour, order, "lk", moves, clock,
    ))
}

fn lk_order(
    instance: &TspInstance,
    mut order: Vec<usize>,
    neighbors: &[Vec<usize>],
    params: LkParams,
) -> (Vec<usize>, usize) {
    let n = order.len();
    if n < 5 {
        let moves = three_opt_in_place(instance, &mut order);
        return (order, moves);
    }
    let mut pos = vec![0; n];
    for (p, &v) in order.iter().enumerate() {
        pos[v] = p;
    }
    let mut bases: Vec<usize> = (0..n).collect();
    bases.shuffle(&mut stream(params.seed, &[]));

    let mut search = Search {
        instance,
        neighbors,
        order,
        pos,
        max_level: params.depth - 1,
        journal: Vec::new(),
        added: Vec::new(),
        removed: Vec::new(),
        best_gain: 0.0,
        best_len: 0,
    };
    let mut moves = 0;
    loop {
        let mut improved = true;
        while improved {
            improved = false;
            for &t1 in &bases {
                for dir in [Dir::Forward, Dir::Backward] {
                    if search.improve_from(t1, dir) {
                        moves += 1;
                        improved = true;
                    }
                }
            }
        }
        let extra = three_opt_in_place(instance, &mut search.order);
        if extra == 0 {
            break;
        }
        moves += extra;
        for (p, &v) in search.order.iter().enumerate() {
            search.pos[v] = p;
        }
    }
    (search.order, moves)
}

/// Runs LK from `starts` random tours and keeps the cheapest result. Start
/// `s` uses streams derived from `(seed, s)`.
pub fn multi_start_lk(
    instance: &TspInstance,
    starts: usize,
    params: LkParams,
) -> Result<SearchResult> {
    if starts == 0 {
        return Err(Error::InvalidParameter(
            "multi-start LK needs at least one start".into(),
        ));
    }
    let clock = Instant::now();
    let neighbors = neighbor_lists(instance, params.neighbors.max(1));
    let mut best: Option<Tour> = None;
    let mut moves = 0;
    for s in 0..starts {
        let mut order: Vec<usize> = (0..instance.n()).collect();
        order.shuffle(&mut stream(params.seed, &[s as u64, 0]));
        let run = LkParams {
            seed: crate::seed::derive_seed(params.seed, &[s as u64, 1]),
            ..params
        };
        let (order, m) = lk_order(instance, order, &neighbors, run);
        moves += m;
        let tour = Tour::new_unchecked(instance, order);
        if best.as_ref().is_none_or(|b| tour.cost() < b.cost()) {
            best = Some(tour);
        }
    }
    Ok(SearchResult::new(
        best.expect("at least one start"),
        "multi-start-lk",
        moves,
        clock.elapsed(),
    ))
}
