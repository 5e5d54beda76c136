//! Tour constructions: nearest neighbour and the three heatmap decoders.

use std::cmp::Ordering;
use std::time::Instant;

use rand::Rng;

use super::{Heatmap, SearchResult};
use crate::error::{Error, Result};
use crate::seed::stream;
use crate::tsp::{Tour, TspInstance};

/// Floor on normalized edge probabilities before taking logs in beam search.
pub const LOG_FLOOR: f64 = 1e-12;

fn check_start(instance: &TspInstance, start: usize) -> Result<()> {
    if start >= instance.n() {
        return Err(Error::VertexOutOfRange {
            vertex: start,
            n: instance.n(),
        });
    }
    Ok(())
}

/// Builds a tour from `start`, asking `next` for each successor.
fn build<F>(n: usize, start: usize, mut next: F) -> Vec<usize>
where
    F: FnMut(usize, &[bool]) -> usize,
{
    let mut visited = vec![false; n];
    visited[start] = true;
    let mut order = Vec::with_capacity(n);
    order.push(start);
    let mut current = start;
    for _ in 1..n {
        let v = next(current, &visited);
        debug_assert!(!visited[v]);
        visited[v] = true;
        order.push(v);
        current = v;
    }
    order
}

fn nearest_unvisited(instance: &TspInstance, from: usize, visited: &[bool]) -> usize {
    let row = instance.row(from);
    let mut best = (f64::INFINITY, usize::MAX);
    for (v, &d) in row.iter().enumerate() {
        if !visited[v] && d < best.0 {
            best = (d, v);
        }
    }
    best.1
}

/// Always moves to the closest unvisited vertex, lowest index on ties.
pub fn nearest_neighbour(instance: &TspInstance, start: usize) -> Result<SearchResult> {
    check_start(instance, start)?;
    let clock = Instant::now();
    let order = build(instance.n(), start, |cur, vis| {
        nearest_unvisited(instance, cur, vis)
    });
    Ok(SearchResult::new(
        Tour::new_unchecked(instance, order),
        "nn",
        0,
        clock.elapsed(),
    ))
}

/// Always moves to the unvisited vertex of highest score, lowest index on
/// ties. If every unvisited vertex scores zero, falls back to the nearest.
pub fn greedy_decode(
    instance: &TspInstance,
    heatmap: &Heatmap,
    start: usize,
) -> Result<SearchResult> {
    heatmap.check_size(instance)?;
    check_start(instance, start)?;
    let clock = Instant::now();
    let order = build(instance.n(), start, |cur, vis| {
        let row = heatmap.row(cur);
        let mut best = (0.0, usize::MAX);
        for (v, &s) in row.iter().enumerate() {
            if !vis[v] && s > best.0 {
                best = (s, v);
            }
        }
        if best.1 == usize::MAX {
            log::debug!("greedy decode: zero scores out of vertex {cur}, taking nearest");
            nearest_unvisited(instance, cur, vis)
        } else {
            best.1
        }
    });
    Ok(SearchResult::new(
        Tour::new_unchecked(instance, order),
        "greedy",
        0,
        clock.elapsed(),
    ))
}

/// Runs `iterations` independent constructions that sample each successor
/// proportionally to its score, and keeps the cheapest. Iteration `i` draws
/// from stream `(seed, i)`, so a run with more iterations extends one with
/// fewer.
pub fn sampling_decode(
    instance: &TspInstance,
    heatmap: &Heatmap,
    iterations: usize,
    seed: u64,
    start: usize,
) -> Result<SearchResult> {
    heatmap.check_size(instance)?;
    check_start(instance, start)?;
    if iterations == 0 {
        return Err(Error::InvalidParameter(
            "sampling needs at least one iteration".into(),
        ));
    }
    let clock = Instant::now();
    let mut best: Option<Tour> = None;
    for it in 0..iterations {
        let mut rng = stream(seed, &[it as u64]);
        let order = build(instance.n(), start, |cur, vis| {
            let row = heatmap.row(cur);
            let total: f64 = row
                .iter()
                .enumerate()
                .filter(|&(v, _)| !vis[v])
                .map(|(_, &s)| s)
                .sum();
            if total <= 0.0 {
                return nearest_unvisited(instance, cur, vis);
            }
            let mut u = rng.gen::<f64>() * total;
            let mut last = usize::MAX;
            for (v, &s) in row.iter().enumerate() {
                if vis[v] || s <= 0.0 {
                    continue;
                }
                last = v;
                if u < s {
                    return v;
                }
                u -= s;
            }
            // Rounding left u a hair above the last positive score.
            last
        });
        let tour = Tour::new_unchecked(instance, order);
        if best.as_ref().is_none_or(|b| tour.cost() < b.cost()) {
            best = Some(tour);
        }
    }
    Ok(SearchResult::new(
        best.expect("at least one iteration"),
        "sample",
        iterations,
        clock.elapsed(),
    ))
}

#[derive(Debug, Clone)]
struct Partial {
    path: Vec<usize>,
    visited: Vec<bool>,
    score: f64,
    cost: f64,
}

impl Partial {
    fn key(&self, next: Option<usize>) -> RankKey<'_> {
        RankKey {
            score: self.score,
            cost: self.cost,
            path: &self.path,
            next,
        }
    }
}

/// A partial path extended by `next` (or not, when `next` is `None`).
struct RankKey<'a> {
    score: f64,
    cost: f64,
    path: &'a [usize],
    next: Option<usize>,
}

/// Higher score first, then cheaper, then lexicographically smaller path.
fn rank(a: &RankKey, b: &RankKey) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then(a.cost.total_cmp(&b.cost))
        .then_with(|| a.path.cmp(b.path))
        .then(a.next.cmp(&b.next))
}

/// Beam search over partial tours, scored by the sum of log row-normalized
/// heatmap scores of their edges (probabilities floored at [`LOG_FLOOR`]).
/// The `width` best partials survive each depth. The result is the
/// highest-scoring complete tour (closing edge included in the score), or,
/// with `shortest_tour_closing`, the cheapest complete tour among the final
/// beams.
pub fn beam_search(
    instance: &TspInstance,
    heatmap: &Heatmap,
    width: usize,
    shortest_tour_closing: bool,
    start: usize,
) -> Result<SearchResult> {
    heatmap.check_size(instance)?;
    check_start(instance, start)?;
    if width == 0 {
        return Err(Error::InvalidParameter(
            "beam width must be at least 1".into(),
        ));
    }
    let clock = Instant::now();
    let n = instance.n();

    let mut logp = vec![LOG_FLOOR.ln(); n * n];
    for i in 0..n {
        let row = heatmap.row(i);
        let total: f64 = row
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, &s)| s)
            .sum();
        if total > 0.0 {
            for j in 0..n {
                if j != i {
                    logp[i * n + j] = (row[j] / total).max(LOG_FLOOR).ln();
                }
            }
        }
    }

    let mut visited = vec![false; n];
    visited[start] = true;
    let mut beams = vec![Partial {
        path: vec![start],
        visited,
        score: 0.0,
        cost: 0.0,
    }];

    for _ in 1..n {
        // (parent, vertex, score, cost)
        let mut candidates: Vec<(usize, usize, f64, f64)> = Vec::new();
        for (p, beam) in beams.iter().enumerate() {
            let last = *beam.path.last().unwrap();
            for v in (0..n).filter(|&v| !beam.visited[v]) {
                candidates.push((
                    p,
                    v,
                    beam.score + logp[last * n + v],
                    beam.cost + instance.dist(last, v),
                ));
            }
        }
        let key = |c: &(usize, usize, f64, f64)| RankKey {
            score: c.2,
            cost: c.3,
            ..beams[c.0].key(Some(c.1))
        };
        candidates.sort_by(|a, b| rank(&key(a), &key(b)));
        candidates.truncate(width);
        beams = candidates
            .into_iter()
            .map(|(p, v, score, cost)| {
                let mut next = beams[p].clone();
                next.path.push(v);
                next.visited[v] = true;
                next.score = score;
                next.cost = cost;
                next
            })
            .collect();
    }

    for beam in &mut beams {
        let last = *beam.path.last().unwrap();
        beam.score += logp[last * n + start];
        beam.cost += instance.dist(last, start);
    }
    let chosen = if shortest_tour_closing {
        beams.iter().min_by(|a, b| {
            a.cost
                .total_cmp(&b.cost)
                .then(b.score.total_cmp(&a.score))
                .then_with(|| a.path.cmp(&b.path))
        })
    } else {
        beams.iter().min_by(|a, b| rank(&a.key(None), &b.key(None)))
    }
    .expect("at least one beam");

    let tag = if shortest_tour_closing {
        "beam-st"
    } else {
        "beam"
    };
    Ok(SearchResult::new(
        Tour::new_unchecked(instance, chosen.path.clone()),
        tag,
        width,
        clock.elapsed(),
    ))
}
