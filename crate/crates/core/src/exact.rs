//! Exact reference solutions: exhaustive enumeration, Held–Karp dynamic
//! programming, and import of optima computed elsewhere.
//!
//! The Held–Karp table is kept after solving. It stores, for every visited
//! set and current vertex, the cheapest way to finish the tour, which is what
//! answers "what is the optimal next move from here?" at arbitrary states,
//! including states that are already off every optimal tour.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tsp::{cyclic_cost, tour_cost, TspInstance, TspProcess, TspState};

/// Where a reference optimum came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    ExactInProcess,
    Imported,
    /// Best cost found by a heuristic; not a proven optimum.
    BestKnown,
}

pub const SOURCE_HELD_KARP: &str = "held-karp";
pub const SOURCE_BRUTE_FORCE: &str = "brute-force";
pub const SOURCE_MULTI_START_LK: &str = "multi-start-lk";

impl Provenance {
    pub fn from_source(source: &str) -> Self {
        match source {
            SOURCE_HELD_KARP | SOURCE_BRUTE_FORCE => Provenance::ExactInProcess,
            SOURCE_MULTI_START_LK => Provenance::BestKnown,
            _ => Provenance::Imported,
        }
    }

    pub fn is_exact(self) -> bool {
        !matches!(self, Provenance::BestKnown)
    }
}

/// An optimal (or best-known) cost for one instance.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSolution {
    pub id: String,
    pub cost: f64,
    pub order: Option<Vec<usize>>,
    pub source: String,
    pub provenance: Provenance,
    /// The cost was checked against the order.
    pub validated: bool,
}

/// One line of a reference file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceRecord {
    pub id: String,
    pub cost: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<Vec<usize>>,
    pub source: String,
}

impl ReferenceSolution {
    fn solved(id: &str, cost: f64, order: Vec<usize>, source: &str) -> Self {
        Self {
            id: id.to_string(),
            cost,
            order: Some(order),
            source: source.to_string(),
            provenance: Provenance::from_source(source),
            validated: true,
        }
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    pub fn to_record(&self) -> ReferenceRecord {
        ReferenceRecord {
            id: self.id.clone(),
            cost: self.cost,
            order: self.order.clone(),
            source: self.source.clone(),
        }
    }
}

/// Largest instance `brute_force` accepts.
pub const BRUTE_FORCE_MAX: usize = 10;

/// Enumerates every distinct tour, `(n-1)!/2` of them, and returns the
/// cheapest. The first minimum in lexicographic order of the successor
/// sequence from vertex 0 wins.
pub fn brute_force(instance: &TspInstance) -> Result<ReferenceSolution> {
    let n = instance.n();
    if n > BRUTE_FORCE_MAX {
        return Err(Error::TooLarge {
            method: "brute force",
            n,
            max: BRUTE_FORCE_MAX,
            hint: "use held-karp",
        });
    }

    let mut order: Vec<usize> = (0..n).collect();
    let mut best_cost = f64::INFINITY;
    let mut best = order.clone();
    loop {
        // Each cycle appears once per direction; keep one.
        if order[1] < order[n - 1] {
            let cost = cyclic_cost(instance, &order);
            if cost < best_cost {
                best_cost = cost;
                best.copy_from_slice(&order);
            }
        }
        if !next_permutation(&mut order[1..]) {
            break;
        }
    }
    Ok(ReferenceSolution::solved(
        "",
        best_cost,
        best,
        SOURCE_BRUTE_FORCE,
    ))
}

/// Lexicographic successor; returns false once the slice is the last
/// permutation.
fn next_permutation(xs: &mut [usize]) -> bool {
    if xs.len() < 2 {
        return false;
    }
    let Some(i) = (0..xs.len() - 1).rev().find(|&i| xs[i] < xs[i + 1]) else {
        return false;
    };
    let j = (i + 1..xs.len()).rev().find(|&j| xs[j] > xs[i]).unwrap();
    xs.swap(i, j);
    xs[i + 1..].reverse();
    true
}

/// Cost-to-finish of every partial tour from the fixed start vertex 0.
///
/// Entry `(S, j)`, for a set `S` of non-start vertices containing `j`, is the
/// minimal cost of a path from `j` through every vertex outside `S ∪ {0}` and
/// back to 0.
#[derive(Debug, Clone)]
pub struct CompletionTable {
    instance: TspInstance,
    // Indexed by mask * (n - 1) + (j - 1); bit j - 1 of mask stands for vertex j.
    finish: Vec<f64>,
    optimal_cost: f64,
}

/// Largest instance `held_karp` accepts; the table holds `(n-1)·2^(n-1)`
/// entries.
pub const HELD_KARP_MAX: usize = 20;

impl CompletionTable {
    pub fn build(instance: &TspInstance) -> Result<Self> {
        let n = instance.n();
        if n > HELD_KARP_MAX {
            return Err(Error::TooLarge {
                method: "held-karp",
                n,
                max: HELD_KARP_MAX,
                hint: "import reference optima computed elsewhere instead",
            });
        }
        let m = n - 1;
        let full = (1usize << m) - 1;
        let mut finish = vec![f64::INFINITY; (full + 1) * m];

        for j in 0..m {
            finish[full * m + j] = instance.dist(j + 1, 0);
        }
        // mask | bit > mask, so larger masks are always ready.
        for mask in (1..full).rev() {
            for j in 0..m {
                if mask & (1 << j) == 0 {
                    continue;
                }
                let row = instance.row(j + 1);
                let mut best = f64::INFINITY;
                for a in 0..m {
                    if mask & (1 << a) != 0 {
                        continue;
                    }
                    let next = mask | (1 << a);
                    let c = row[a + 1] + finish[next * m + a];
                    if c < best {
                        best = c;
                    }
                }
                finish[mask * m + j] = best;
            }
        }

        let optimal_cost = (0..m)
            .map(|a| instance.dist(0, a + 1) + finish[(1 << a) * m + a])
            .fold(f64::INFINITY, f64::min);

        Ok(Self {
            instance: instance.clone(),
            finish,
            optimal_cost,
        })
    }

    pub fn instance(&self) -> &TspInstance {
        &self.instance
    }

    /// `f(start-only, start)`: the optimal tour cost.
    pub fn optimal_cost(&self) -> f64 {
        self.optimal_cost
    }

    /// Minimal cost to finish the tour from `state`, closing edge included.
    pub fn cost_to_finish(&self, state: &TspState) -> Result<f64> {
        self.check(state)?;
        let m = self.instance.n() - 1;
        let mask = (state.visited >> 1) as usize;
        if state.current == TspProcess::START {
            if mask != 0 {
                return Err(Error::InvalidParameter(
                    "only the initial state may sit at the start vertex".into(),
                ));
            }
            return Ok(self.optimal_cost);
        }
        Ok(self.finish[mask * m + state.current - 1])
    }

    /// First move of an optimal completion of `state`: the unvisited `a`
    /// minimizing `dist(current, a) + f(visited ∪ {a}, a)`, lowest index on
    /// ties.
    pub fn optimal_action(&self, state: &TspState) -> Result<usize> {
        self.check(state)?;
        let n = self.instance.n();
        let m = n - 1;
        let mask = (state.visited >> 1) as usize;
        if mask == (1 << m) - 1 {
            return Err(Error::TerminalState);
        }
        let row = self.instance.row(state.current);
        let mut best = (f64::INFINITY, usize::MAX);
        for (a, d) in row.iter().enumerate().skip(1) {
            let bit = 1 << (a - 1);
            if mask & bit != 0 {
                continue;
            }
            let c = d + self.finish[(mask | bit) * m + a - 1];
            if c < best.0 {
                best = (c, a);
            }
        }
        Ok(best.1)
    }

    fn check(&self, state: &TspState) -> Result<()> {
        let n = self.instance.n();
        let in_range = state.current < n && state.visited >> n == 0;
        if state.instance != self.instance.fingerprint()
            || !in_range
            || state.visited & 1 == 0
            || state.visited & (1 << state.current) == 0
        {
            return Err(Error::InstanceMismatch);
        }
        Ok(())
    }

    /// Follows `optimal_action` from the initial state.
    pub fn optimal_order(&self) -> Vec<usize> {
        let n = self.instance.n();
        let mut state = TspState::from_path(&self.instance, &[]).expect("n <= 20");
        let mut order = vec![TspProcess::START];
        while order.len() < n {
            let a = self.optimal_action(&state).expect("non-terminal state");
            order.push(a);
            state.visited |= 1 << a;
            state.current = a;
            state.steps += 1;
        }
        order
    }
}

/// Solves the instance exactly and keeps the completion table.
///
/// The reported cost is the cyclic cost of the returned order, summed the
/// same way as every other tour cost in the crate.
pub fn held_karp(instance: &TspInstance) -> Result<(ReferenceSolution, CompletionTable)> {
    let table = CompletionTable::build(instance)?;
    let order = table.optimal_order();
    let cost = cyclic_cost(instance, &order);
    Ok((
        ReferenceSolution::solved("", cost, order, SOURCE_HELD_KARP),
        table,
    ))
}

/// Answers the optimal next move for `state` from `table`.
pub fn optimal_action(table: &CompletionTable, state: &TspState) -> Result<usize> {
    table.optimal_action(state)
}

/// A reference record that failed validation.
#[derive(Debug, Clone, PartialEq)]
pub struct Rejection {
    pub id: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ImportOutcome {
    pub accepted: Vec<ReferenceSolution>,
    pub rejected: Vec<Rejection>,
}

/// Relative tolerance when checking an imported cost against its order.
pub const IMPORT_TOLERANCE: f64 = 1e-6;

/// Reads a JSON-lines reference file.
///
/// Records with an order are checked against `tour_cost` on the instance
/// `lookup` resolves; records without one are accepted unvalidated. Records
/// naming an unknown instance, carrying an invalid order, or disagreeing with
/// their order by more than [`IMPORT_TOLERANCE`] are rejected. Malformed JSON
/// is a hard error.
pub fn import_references<'a, F>(path: &Path, lookup: F) -> Result<ImportOutcome>
where
    F: Fn(&str) -> Option<&'a TspInstance>,
{
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut outcome = ImportOutcome::default();
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let record: ReferenceRecord =
            serde_json::from_str(line).map_err(|e| Error::json(path, e))?;
        let reject = |reason: String| Rejection {
            id: record.id.clone(),
            reason,
        };
        let Some(instance) = lookup(&record.id) else {
            outcome.rejected.push(reject("unknown instance id".into()));
            continue;
        };
        if !(record.cost.is_finite() && record.cost > 0.0) {
            outcome
                .rejected
                .push(reject(format!("cost {} is not positive", record.cost)));
            continue;
        }
        let validated = match &record.order {
            None => false,
            Some(order) => match tour_cost(instance, order) {
                Err(e) => {
                    outcome.rejected.push(reject(format!("invalid order: {e}")));
                    continue;
                }
                Ok(c) if (c - record.cost).abs() > IMPORT_TOLERANCE * record.cost => {
                    outcome.rejected.push(reject(format!(
                        "declared cost {} but the order costs {c}",
                        record.cost
                    )));
                    continue;
                }
                Ok(_) => true,
            },
        };
        outcome.accepted.push(ReferenceSolution {
            provenance: Provenance::from_source(&record.source),
            id: record.id,
            cost: record.cost,
            order: record.order,
            source: record.source,
            validated,
        });
    }
    Ok(outcome)
}

/// Writes references as JSON lines.
pub fn write_references(path: &Path, references: &[ReferenceSolution]) -> Result<()> {
    let mut out = Vec::new();
    for r in references {
        serde_json::to_writer(&mut out, &r.to_record()).map_err(|e| Error::json(path, e))?;
        out.push(b'\n');
    }
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&out).map_err(|e| Error::io(path, e))
}
