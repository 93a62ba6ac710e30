//! Inverse-correlation distance graph and orthogonal spanning tree extraction.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::correlation::CorrelationMatrix;

/// Undirected edge with `i < j`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedEdge<T> {
    pub i: usize,
    pub j: usize,
    pub weight: T,
}

impl<T: Scalar> WeightedEdge<T> {
    pub fn new(a: usize, b: usize, weight: T) -> Self {
        let (i, j) = if a < b { (a, b) } else { (b, a) };
        Self { i, j, weight }
    }

    pub fn key(&self) -> (usize, usize) {
        (self.i, self.j)
    }
}

/// Weight ascending, then `(i, j)` lexicographic.
pub fn kruskal_order<T: Scalar>(a: &WeightedEdge<T>, b: &WeightedEdge<T>) -> Ordering {
    a.weight
        .partial_cmp(&b.weight)
        .unwrap_or(Ordering::Equal)
        .then_with(|| a.key().cmp(&b.key()))
}

/// Distance graph with `d_ij = 1/|r_ij|`; zero correlations carry no edge.
#[derive(Debug, Clone, PartialEq)]
pub struct InverseWeightedGraph<T> {
    n: usize,
    edges: Vec<WeightedEdge<T>>,
}

impl<T: Scalar> InverseWeightedGraph<T> {
    pub fn from_edges(n: usize, edges: Vec<WeightedEdge<T>>) -> Result<Self> {
        for e in &edges {
            if e.j >= n || e.i == e.j {
                return Err(Error::ShapeMismatch(format!("edge ({}, {}) invalid for {n} nodes", e.i, e.j)));
            }
            if !(e.weight > T::zero()) || !e.weight.is_finite() {
                return Err(Error::BadConfig(format!("edge ({}, {}) has non-positive weight", e.i, e.j)));
            }
        }
        Ok(Self { n, edges })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[WeightedEdge<T>] {
        &self.edges
    }

    pub fn weight(&self, i: usize, j: usize) -> Option<T> {
        let key = if i < j { (i, j) } else { (j, i) };
        self.edges.iter().find(|e| e.key() == key).map(|e| e.weight)
    }
}

pub fn inverse_distance_graph<T: Scalar>(r: &CorrelationMatrix<T>) -> InverseWeightedGraph<T> {
    let n = r.n();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let v = r.get(i, j);
            if v != T::zero() {
                edges.push(WeightedEdge::new(i, j, T::one() / v.abs()));
            }
        }
    }
    InverseWeightedGraph { n, edges }
}

/// Disjoint-set forest with path halving and union by size.
#[derive(Debug, Clone)]
pub struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Returns `false` when `a` and `b` were already connected.
    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
        true
    }
}

/// Minimum spanning forest over `sorted` edges (already in Kruskal order),
/// returned in acceptance order.
fn kruskal_sorted<T: Scalar>(n: usize, sorted: &[WeightedEdge<T>]) -> Vec<WeightedEdge<T>> {
    let mut uf = UnionFind::new(n);
    let mut tree = Vec::with_capacity(n.saturating_sub(1));
    for e in sorted {
        if uf.union(e.i, e.j) {
            tree.push(*e);
            if tree.len() + 1 == n {
                break;
            }
        }
    }
    tree
}

/// Minimum spanning forest of the given graph (Kruskal, ties by `(i, j)`).
pub fn kruskal<T: Scalar>(graph: &InverseWeightedGraph<T>) -> Vec<WeightedEdge<T>> {
    let mut sorted = graph.edges.clone();
    sorted.sort_by(kruskal_order);
    kruskal_sorted(graph.n, &sorted)
}

/// Sequence of pairwise edge-disjoint minimum spanning forests.
#[derive(Debug, Clone, PartialEq)]
pub struct MstSequence<T> {
    pub trees: Vec<Vec<WeightedEdge<T>>>,
}

impl<T: Scalar> MstSequence<T> {
    /// All edges in extraction order.
    pub fn edges_in_order(&self) -> impl Iterator<Item = &WeightedEdge<T>> {
        self.trees.iter().flatten()
    }

    pub fn edge_count(&self) -> usize {
        self.trees.iter().map(Vec::len).sum()
    }
}

/// Default tree budget `⌊E/(N−1)⌋ + 1`.
pub fn default_max_trees(n: usize, edges: usize) -> usize {
    edges / n.saturating_sub(1).max(1) + 1
}

/// Repeatedly extracts a minimum spanning forest and removes its edges.
///
/// Stops after `max_trees` rounds or once the residual graph is empty.
pub fn orthogonal_msts<T: Scalar>(graph: &InverseWeightedGraph<T>, max_trees: usize) -> Result<MstSequence<T>> {
    if graph.edges.is_empty() {
        return Err(Error::EmptyGraph);
    }
    if graph.n < 2 {
        return Err(Error::ShapeMismatch("need at least two nodes".into()));
    }
    let mut residual = graph.edges.clone();
    residual.sort_by(kruskal_order);
    let mut trees = Vec::new();
    while trees.len() < max_trees && !residual.is_empty() {
        let tree = kruskal_sorted(graph.n, &residual);
        let mut taken: Vec<(usize, usize)> = tree.iter().map(WeightedEdge::key).collect();
        taken.sort_unstable();
        residual.retain(|e| taken.binary_search(&e.key()).is_err());
        trees.push(tree);
    }
    Ok(MstSequence { trees })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn graph(n: usize, edges: &[(usize, usize, f64)]) -> InverseWeightedGraph<f64> {
        InverseWeightedGraph::from_edges(n, edges.iter().map(|&(i, j, w)| WeightedEdge::new(i, j, w)).collect()).unwrap()
    }

    fn keys(tree: &[WeightedEdge<f64>]) -> HashSet<(usize, usize)> {
        tree.iter().map(WeightedEdge::key).collect()
    }

    #[test]
    fn inverse_weights() {
        let r = CorrelationMatrix::new(crate::Tensor::from_rows(&[
            vec![1.0, 0.5, 0.0],
            vec![0.5, 1.0, -0.25],
            vec![0.0, -0.25, 1.0],
        ]))
        .unwrap();
        let d = inverse_distance_graph(&r);
        assert_eq!(d.weight(0, 1), Some(2.0));
        assert_eq!(d.weight(1, 2), Some(4.0));
        assert_eq!(d.weight(0, 2), None);
        assert_eq!(d.edges().len(), 2);
    }

    /// All spanning trees of a small graph by subset enumeration.
    fn brute_force_mst(n: usize, edges: &[WeightedEdge<f64>]) -> HashSet<(usize, usize)> {
        let m = edges.len();
        let mut best: Option<(f64, HashSet<(usize, usize)>)> = None;
        for mask in 0u32..(1 << m) {
            if mask.count_ones() as usize != n - 1 {
                continue;
            }
            let mut uf = UnionFind::new(n);
            let mut ok = true;
            let mut w = 0.0;
            let mut set = HashSet::new();
            for (k, e) in edges.iter().enumerate() {
                if mask & (1 << k) != 0 {
                    ok &= uf.union(e.i, e.j);
                    w += e.weight;
                    set.insert(e.key());
                }
            }
            if ok && best.as_ref().is_none_or(|(bw, _)| w < *bw) {
                best = Some((w, set));
            }
        }
        best.map(|b| b.1).unwrap_or_default()
    }

    #[test]
    fn triangle_sequence() {
        let g = graph(3, &[(0, 1, 1.0), (1, 2, 2.0), (0, 2, 3.0)]);
        assert_eq!(brute_force_mst(3, g.edges()), keys(&kruskal(&g)));
        let seq = orthogonal_msts(&g, 10).unwrap();
        assert_eq!(seq.trees.len(), 2);
        assert_eq!(keys(&seq.trees[0]), HashSet::from([(0, 1), (1, 2)]));
        assert_eq!(keys(&seq.trees[1]), HashSet::from([(0, 2)]));
    }

    #[test]
    fn tree_input_yields_single_tree() {
        let g = graph(4, &[(0, 1, 1.0), (1, 2, 5.0), (2, 3, 2.0)]);
        let seq = orthogonal_msts(&g, 10).unwrap();
        assert_eq!(seq.trees.len(), 1);
        assert_eq!(seq.trees[0].len(), 3);
    }

    #[test]
    fn k4_matches_exclusion_oracle() {
        let g = graph(4, &[(0, 1, 1.3), (0, 2, 0.7), (0, 3, 2.9), (1, 2, 1.9), (1, 3, 0.4), (2, 3, 2.2)]);
        let seq = orthogonal_msts(&g, 10).unwrap();
        // Oracle: brute-force MST, remove it, brute-force spanning forest again.
        let first = brute_force_mst(4, g.edges());
        assert_eq!(keys(&seq.trees[0]), first);
        let rest: Vec<_> = g.edges().iter().copied().filter(|e| !first.contains(&e.key())).collect();
        let second = brute_force_mst(4, &rest);
        assert_eq!(keys(&seq.trees[1]), second);
        assert_eq!(seq.trees.len(), 2);
        assert!(keys(&seq.trees[0]).is_disjoint(&keys(&seq.trees[1])));
        assert_eq!(seq.edge_count(), 6);
    }

    #[test]
    fn empty_graph_rejected() {
        let g = graph(3, &[]);
        assert!(matches!(orthogonal_msts(&g, 3), Err(Error::EmptyGraph)));
    }

    #[test]
    fn equal_weights_break_ties_lexicographically() {
        let g = graph(3, &[(1, 2, 1.0), (0, 2, 1.0), (0, 1, 1.0)]);
        let t = kruskal(&g);
        assert_eq!(t.iter().map(WeightedEdge::key).collect::<Vec<_>>(), vec![(0, 1), (0, 2)]);
    }

    #[test]
    fn default_budget() {
        assert_eq!(default_max_trees(5, 10), 3);
        assert_eq!(default_max_trees(2, 1), 2);
    }
}
