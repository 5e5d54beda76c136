//! Euclidean TSP instances on the unit square, tours, and the TSP as a
//! sequential decision process.

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cop::{DecisionProcess, Rollout};
use crate::error::{Error, Result};
use crate::exact::CompletionTable;
use crate::seed::{fnv1a, stream};

/// `n` points in the unit square with their full Euclidean distance matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct TspInstance {
    coords: Vec<[f64; 2]>,
    dist: Vec<f64>,
    fingerprint: u64,
}

/// On-disk form of an instance: `{"n": int, "coords": [[x, y], ...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceFile {
    pub n: usize,
    pub coords: Vec<[f64; 2]>,
}

impl TspInstance {
    /// Builds an instance from coordinates in `[0, 1]²`.
    pub fn from_coords(coords: Vec<[f64; 2]>) -> Result<Self> {
        let n = coords.len();
        if n < 3 {
            return Err(Error::TooFewVertices(n));
        }
        for (i, &[x, y]) in coords.iter().enumerate() {
            if !(0.0..=1.0).contains(&x) || !(0.0..=1.0).contains(&y) {
                return Err(Error::InvalidInstance(format!(
                    "vertex {i} at ({x}, {y}) lies outside the unit square"
                )));
            }
        }

        let mut dist = vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let d = euclidean(coords[i], coords[j]);
                dist[i * n + j] = d;
                dist[j * n + i] = d;
            }
        }

        let mut bytes = Vec::with_capacity(16 * n);
        for &[x, y] in &coords {
            bytes.extend_from_slice(&x.to_bits().to_le_bytes());
            bytes.extend_from_slice(&y.to_bits().to_le_bytes());
        }
        let fingerprint = fnv1a(&bytes);

        Ok(Self {
            coords,
            dist,
            fingerprint,
        })
    }

    /// Samples `n` vertices i.i.d. uniformly on the unit square.
    pub fn generate(n: usize, seed: u64) -> Result<Self> {
        if n < 3 {
            return Err(Error::TooFewVertices(n));
        }
        let mut rng = stream(seed, &[]);
        let coords = (0..n)
            .map(|_| [rng.gen::<f64>(), rng.gen::<f64>()])
            .collect();
        Self::from_coords(coords)
    }

    pub fn n(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[[f64; 2]] {
        &self.coords
    }

    #[inline]
    pub fn dist(&self, i: usize, j: usize) -> f64 {
        self.dist[i * self.coords.len() + j]
    }

    /// Row `i` of the distance matrix.
    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.n();
        &self.dist[i * n..(i + 1) * n]
    }

    /// Hash of the exact coordinate bits; identifies the instance.
    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    pub fn to_file(&self) -> InstanceFile {
        InstanceFile {
            n: self.n(),
            coords: self.coords.clone(),
        }
    }

    pub fn from_file(file: InstanceFile) -> Result<Self> {
        if file.n != file.coords.len() {
            return Err(Error::InvalidInstance(format!(
                "declared n = {} but {} coordinates given",
                file.n,
                file.coords.len()
            )));
        }
        Self::from_coords(file.coords)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_file()).expect("instance serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: InstanceFile = serde_json::from_str(text)
            .map_err(|e| Error::InvalidInstance(format!("malformed instance JSON: {e}")))?;
        Self::from_file(file)
    }
}

fn euclidean(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Checks that `order` is a permutation of `0..n`.
pub fn validate_permutation(n: usize, order: &[usize]) -> Result<()> {
    let mut seen = vec![false; n];
    for &v in order {
        if v >= n {
            return Err(Error::VertexOutOfRange { vertex: v, n });
        }
        if std::mem::replace(&mut seen[v], true) {
            return Err(Error::RepeatedVertex { vertex: v });
        }
    }
    // With no repeats and nothing out of range, only a short tour is left.
    match seen.iter().position(|&s| !s) {
        Some(vertex) => Err(Error::MissingVertex { vertex }),
        None => Ok(()),
    }
}

/// Cyclic cost of `order`, closing edge included.
pub fn tour_cost(instance: &TspInstance, order: &[usize]) -> Result<f64> {
    validate_permutation(instance.n(), order)?;
    Ok(cyclic_cost(instance, order))
}

/// Cyclic cost without validation.
pub(crate) fn cyclic_cost(instance: &TspInstance, order: &[usize]) -> f64 {
    let open: f64 = order.windows(2).map(|w| instance.dist(w[0], w[1])).sum();
    open + instance.dist(order[order.len() - 1], order[0])
}

/// A Hamiltonian cycle with its cost.
#[derive(Debug, Clone, PartialEq)]
pub struct Tour {
    order: Vec<usize>,
    cost: f64,
}

impl Tour {
    pub fn new(instance: &TspInstance, order: Vec<usize>) -> Result<Self> {
        let cost = tour_cost(instance, &order)?;
        Ok(Self { order, cost })
    }

    /// For callers that have just built a permutation themselves.
    pub(crate) fn new_unchecked(instance: &TspInstance, order: Vec<usize>) -> Self {
        debug_assert!(validate_permutation(instance.n(), &order).is_ok());
        let cost = cyclic_cost(instance, &order);
        Self { order, cost }
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn cost(&self) -> f64 {
        self.cost
    }

    pub fn into_order(self) -> Vec<usize> {
        self.order
    }

    /// Undirected edge set, each edge as `(min, max)`, sorted.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let n = self.order.len();
        let mut edges: Vec<_> = (0..n)
            .map(|t| {
                let (a, b) = (self.order[t], self.order[(t + 1) % n]);
                (a.min(b), a.max(b))
            })
            .collect();
        edges.sort_unstable();
        edges
    }

    /// Rotates so the tour starts at vertex 0 and, of the two directions,
    /// picks the one whose second vertex is smaller. Equal tours have equal
    /// canonical forms.
    pub fn canonical_order(&self) -> Vec<usize> {
        canonical(&self.order)
    }
}

pub(crate) fn canonical(order: &[usize]) -> Vec<usize> {
    let n = order.len();
    let zero = order.iter().position(|&v| v == 0).unwrap_or(0);
    let forward: Vec<usize> = (0..n).map(|t| order[(zero + t) % n]).collect();
    let backward: Vec<usize> = (0..n).map(|t| order[(zero + n - t) % n]).collect();
    if forward <= backward {
        forward
    } else {
        backward
    }
}

/// State of the tour-construction process: visited set and current vertex.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TspState {
    pub(crate) visited: u64,
    pub(crate) current: usize,
    pub(crate) steps: usize,
    pub(crate) instance: u64,
}

impl TspState {
    /// Builds an arbitrary state: the tour so far starts at vertex 0 and
    /// visits `path` in order (not including 0).
    pub fn from_path(instance: &TspInstance, path: &[usize]) -> Result<Self> {
        let n = instance.n();
        if n > TspProcess::MAX_VERTICES {
            return Err(Error::TooLarge {
                method: "TspProcess",
                n,
                max: TspProcess::MAX_VERTICES,
                hint: "states are stored as 64-bit masks",
            });
        }
        let mut visited = 1u64;
        let mut current = 0;
        for &v in path {
            if v >= n {
                return Err(Error::VertexOutOfRange { vertex: v, n });
            }
            if visited & (1 << v) != 0 {
                return Err(Error::RepeatedVertex { vertex: v });
            }
            visited |= 1 << v;
            current = v;
        }
        Ok(Self {
            visited,
            current,
            steps: path.len(),
            instance: instance.fingerprint(),
        })
    }

    pub fn current(&self) -> usize {
        self.current
    }

    pub fn is_visited(&self, v: usize) -> bool {
        v < 64 && self.visited & (1 << v) != 0
    }

    pub fn visited_mask(&self) -> u64 {
        self.visited
    }

    pub fn steps(&self) -> usize {
        self.steps
    }
}

/// The TSP as a decision process: tours are built from vertex 0, one
/// successor at a time. The last (forced) step also pays the closing edge
/// back to 0, so step costs add up to the tour cost.
///
/// The optimal action at any state is answered from a Held–Karp completion
/// table, which bounds the process to `CompletionTable::MAX_VERTICES`.
#[derive(Debug, Clone)]
pub struct TspProcess {
    table: Arc<CompletionTable>,
    full: u64,
}

impl TspProcess {
    pub const START: usize = 0;
    pub const MAX_VERTICES: usize = 64;

    /// Solves the instance exactly and wraps it as a decision process.
    pub fn new(instance: &TspInstance) -> Result<Self> {
        let (_, table) = crate::exact::held_karp(instance)?;
        Ok(Self::from_table(Arc::new(table)))
    }

    pub fn from_table(table: Arc<CompletionTable>) -> Self {
        let n = table.instance().n();
        let full = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
        Self { table, full }
    }

    pub fn instance(&self) -> &TspInstance {
        self.table.instance()
    }

    pub fn table(&self) -> &CompletionTable {
        &self.table
    }

    /// The exact optimum, `f(start-only, start)`.
    pub fn optimal_cost(&self) -> f64 {
        self.table.optimal_cost()
    }

    /// The tour induced by a complete rollout.
    pub fn tour_of(&self, rollout: &Rollout<usize>) -> Result<Tour> {
        let order: Vec<usize> = std::iter::once(Self::START)
            .chain(rollout.actions().copied())
            .collect();
        Tour::new(self.instance(), order)
    }
}

/// Wraps an instance as a decision process, building its completion table.
pub fn as_process(instance: &TspInstance) -> Result<TspProcess> {
    TspProcess::new(instance)
}

impl DecisionProcess for TspProcess {
    type State = TspState;
    type Action = usize;

    fn initial_state(&self) -> TspState {
        TspState {
            visited: 1 << Self::START,
            current: Self::START,
            steps: 0,
            instance: self.instance().fingerprint(),
        }
    }

    fn valid_actions(&self, state: &TspState) -> Vec<usize> {
        (0..self.instance().n())
            .filter(|&v| state.visited & (1 << v) == 0)
            .collect()
    }

    fn transition(&self, state: &TspState, action: usize) -> TspState {
        TspState {
            visited: state.visited | (1 << action),
            current: action,
            steps: state.steps + 1,
            instance: state.instance,
        }
    }

    fn cost(&self, state: &TspState, action: usize) -> f64 {
        let inst = self.instance();
        let step = inst.dist(state.current, action);
        if state.visited | (1 << action) == self.full {
            step + inst.dist(action, Self::START)
        } else {
            step
        }
    }

    fn is_terminal(&self, state: &TspState) -> bool {
        state.visited == self.full
    }

    fn step_index(&self, state: &TspState) -> Option<usize> {
        (!self.is_terminal(state)).then_some(state.steps)
    }

    fn optimal_action(&self, state: &TspState) -> Result<usize> {
        self.table.optimal_action(state)
    }
}
