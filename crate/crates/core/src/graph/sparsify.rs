//! OMST and percentage-threshold sparsification.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::correlation::CorrelationMatrix;
use super::efficiency::{efficiency_from_histogram, hop_matrix, wiring_cost, Adjacency, HopMatrix};
use super::mst::{default_max_trees, inverse_distance_graph, orthogonal_msts, MstSequence, WeightedEdge};

/// Sparsified brain graph with its hop-distance matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseBrainGraph<T> {
    adjacency: Adjacency,
    edge_weights: BTreeMap<(usize, usize), T>,
    spl: HopMatrix,
    /// Fraction of the `N(N−1)/2` possible edges that are present.
    pub density: f64,
    pub ge: T,
    pub cost: T,
    pub objective: T,
}

impl<T: Scalar> SparseBrainGraph<T> {
    /// Builds the graph from `(i, j)` edges weighted by `|r_ij|`.
    pub fn from_edges(r: &CorrelationMatrix<T>, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let n = r.n();
        let mut edge_weights = BTreeMap::new();
        for (a, b) in edges {
            if a == b || a >= n || b >= n {
                return Err(Error::ShapeMismatch(format!("edge ({a}, {b}) invalid for {n} nodes")));
            }
            let key = (a.min(b), a.max(b));
            edge_weights.insert(key, r.get(a, b).abs());
        }
        let adjacency = Adjacency::from_edges(n, edge_weights.keys().copied());
        let spl = hop_matrix(&adjacency);
        let ge = efficiency_from_histogram(n, &super::efficiency::hop_histogram(&spl));
        let cost = wiring_cost(edge_weights.keys().copied(), r)?;
        let pairs = n * n.saturating_sub(1) / 2;
        let density = if pairs == 0 {
            0.0
        } else {
            edge_weights.len() as f64 / pairs as f64
        };
        Ok(Self {
            adjacency,
            edge_weights,
            spl,
            density,
            ge,
            cost,
            objective: ge - cost,
        })
    }

    pub fn n(&self) -> usize {
        self.adjacency.n()
    }

    pub fn adjacency(&self) -> &Adjacency {
        &self.adjacency
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.edge_weights.contains_key(&(i.min(j), i.max(j)))
    }

    /// Edge map keyed by `(i, j)` with `i < j`, valued `|r_ij|`.
    pub fn edge_weights(&self) -> &BTreeMap<(usize, usize), T> {
        &self.edge_weights
    }

    pub fn edge_count(&self) -> usize {
        self.edge_weights.len()
    }

    pub fn spl(&self) -> &HopMatrix {
        &self.spl
    }

    /// Dense 0/1 adjacency, row-major.
    pub fn adjacency_matrix(&self) -> Vec<u8> {
        let n = self.n();
        let mut out = vec![0u8; n * n];
        for &(i, j) in self.edge_weights.keys() {
            out[i * n + j] = 1;
            out[j * n + i] = 1;
        }
        out
    }
}

const UNREACHED: u32 = u32::MAX / 4;

/// All-pairs hop distances maintained under edge insertion.
struct IncrementalHops {
    n: usize,
    dist: Vec<u32>,
}

impl IncrementalHops {
    fn new(n: usize) -> Self {
        let mut dist = vec![UNREACHED; n * n];
        for i in 0..n {
            dist[i * n + i] = 0;
        }
        Self { n, dist }
    }

    fn insert(&mut self, u: usize, v: usize) {
        let n = self.n;
        if self.dist[u * n + v] <= 1 {
            return;
        }
        let du: Vec<u32> = self.dist[u * n..(u + 1) * n].to_vec();
        let dv: Vec<u32> = self.dist[v * n..(v + 1) * n].to_vec();
        for a in 0..n {
            let (au, av) = (du[a], dv[a]);
            if au >= UNREACHED && av >= UNREACHED {
                continue;
            }
            let row = &mut self.dist[a * n..(a + 1) * n];
            for b in 0..n {
                let via_uv = au.saturating_add(1).saturating_add(dv[b]);
                let via_vu = av.saturating_add(1).saturating_add(du[b]);
                let best = via_uv.min(via_vu);
                if best < row[b] {
                    row[b] = best;
                }
            }
        }
    }

    fn histogram(&self) -> Vec<u64> {
        let n = self.n;
        let mut hist = vec![0u64; n.max(1)];
        for a in 0..n {
            for b in 0..n {
                let d = self.dist[a * n + b];
                if a != b && d < UNREACHED {
                    hist[d as usize] += 1;
                }
            }
        }
        hist
    }
}

/// Objective `GE − Cost` of every prefix of `order` (prefix `k` holds the
/// first `k + 1` edges).
pub fn prefix_objectives<T: Scalar>(r: &CorrelationMatrix<T>, order: &[(usize, usize)]) -> Result<Vec<T>> {
    let n = r.n();
    let total = r.total_abs_weight();
    if total == T::zero() {
        return Err(Error::DenseWeightZero);
    }
    let mut hops = IncrementalHops::new(n);
    let mut kept = T::zero();
    let mut out = Vec::with_capacity(order.len());
    for &(i, j) in order {
        hops.insert(i, j);
        kept += r.get(i, j).abs();
        let ge: T = efficiency_from_histogram(n, &hops.histogram());
        out.push(ge - kept / total);
    }
    Ok(out)
}

/// Index of the maximum; ties resolve to the earliest (sparsest) entry.
fn first_argmax<T: Scalar>(values: &[T]) -> Option<usize> {
    let mut best: Option<(usize, T)> = None;
    for (k, &v) in values.iter().enumerate() {
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((k, v));
        }
    }
    best.map(|(k, _)| k)
}

/// OMST sparsification with the default tree budget.
pub fn omst_sparsify<T: Scalar>(r: &CorrelationMatrix<T>) -> Result<SparseBrainGraph<T>> {
    let d = inverse_distance_graph(r);
    let budget = default_max_trees(r.n(), d.edges().len());
    omst_sparsify_with(r, budget)
}

/// OMST sparsification: extract orthogonal MSTs, then keep the edge prefix
/// (in extraction order) that maximises `GE − Cost`.
pub fn omst_sparsify_with<T: Scalar>(r: &CorrelationMatrix<T>, max_trees: usize) -> Result<SparseBrainGraph<T>> {
    let n = r.n();
    let d = inverse_distance_graph(r);
    let seq: MstSequence<T> = orthogonal_msts(&d, max_trees)?;
    let first = seq.trees.first().map_or(0, Vec::len);
    if first + 1 != n {
        return Err(Error::DisconnectedInput {
            covered: first + 1,
            nodes: n,
        });
    }
    let order: Vec<(usize, usize)> = seq.edges_in_order().map(WeightedEdge::key).collect();
    let objectives = prefix_objectives(r, &order)?;
    let k = first_argmax(&objectives).ok_or(Error::EmptyGraph)?;
    SparseBrainGraph::from_edges(r, order[..=k].iter().copied())
}

/// Keeps the `⌈density · N(N−1)/2⌉` strongest nonzero correlations.
/// Equal strengths resolve by `(i, j)` lexicographic order.
pub fn threshold_sparsify<T: Scalar>(r: &CorrelationMatrix<T>, density: f64) -> Result<SparseBrainGraph<T>> {
    if !(density > 0.0 && density <= 1.0) {
        return Err(Error::BadConfig(format!("density {density} outside (0, 1]")));
    }
    let n = r.n();
    let mut candidates: Vec<(T, usize, usize)> = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let w = r.get(i, j).abs();
            if w > T::zero() {
                candidates.push((w, i, j));
            }
        }
    }
    candidates.sort_by(|a, b| {
        b.0.partial_cmp(&a.0)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| (a.1, a.2).cmp(&(b.1, b.2)))
    });
    let pairs = n * n.saturating_sub(1) / 2;
    let keep = ((density * pairs as f64).ceil() as usize).min(candidates.len());
    SparseBrainGraph::from_edges(r, candidates[..keep].iter().map(|&(_, i, j)| (i, j)))
}
