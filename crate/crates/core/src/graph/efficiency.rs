//! Hop distances, global efficiency and wiring cost.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

use super::correlation::CorrelationMatrix;

/// Unweighted undirected adjacency lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Adjacency {
    neighbors: Vec<Vec<usize>>,
}

impl Adjacency {
    pub fn empty(n: usize) -> Self {
        Self {
            neighbors: vec![Vec::new(); n],
        }
    }

    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut adj = Self::empty(n);
        for (i, j) in edges {
            adj.add_edge(i, j);
        }
        adj
    }

    pub fn add_edge(&mut self, i: usize, j: usize) {
        if i != j && !self.neighbors[i].contains(&j) {
            self.neighbors[i].push(j);
            self.neighbors[j].push(i);
        }
    }

    pub fn n(&self) -> usize {
        self.neighbors.len()
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn edge_count(&self) -> usize {
        self.neighbors.iter().map(Vec::len).sum::<usize>() / 2
    }
}

/// All-pairs hop counts; unreachable pairs hold the sentinel `N`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HopMatrix {
    n: usize,
    hops: Vec<u32>,
}

impl HopMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn sentinel(&self) -> u32 {
        self.n as u32
    }

    pub fn get(&self, i: usize, j: usize) -> u32 {
        self.hops[i * self.n + j]
    }

    pub fn is_reachable(&self, i: usize, j: usize) -> bool {
        i == j || self.get(i, j) != self.sentinel()
    }

    pub fn max(&self) -> u32 {
        self.hops.iter().copied().max().unwrap_or(0)
    }

    pub fn to_tensor<T: Scalar>(&self) -> Tensor<T> {
        Tensor::matrix(self.n, self.n, self.hops.iter().map(|&h| T::of(h as f64)).collect())
    }

    /// Rebuilds from raw row-major hops; used when loading stored graphs.
    pub fn from_raw(n: usize, hops: Vec<u32>) -> Result<Self> {
        if hops.len() != n * n {
            return Err(Error::ShapeMismatch(format!("{} hop entries for {n} nodes", hops.len())));
        }
        Ok(Self { n, hops })
    }

    /// Relabels nodes: entry `(i, j)` of the result is `(perm[i], perm[j])` here.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let n = self.n;
        let mut hops = vec![0; n * n];
        for i in 0..n {
            for j in 0..n {
                hops[i * n + j] = self.get(perm[i], perm[j]);
            }
        }
        Self { n, hops }
    }
}

/// Breadth-first search from every node.
pub fn hop_matrix(adj: &Adjacency) -> HopMatrix {
    let n = adj.n();
    let sentinel = n as u32;
    let mut hops = vec![sentinel; n * n];
    let mut queue = VecDeque::new();
    for s in 0..n {
        let row = &mut hops[s * n..(s + 1) * n];
        row[s] = 0;
        queue.clear();
        queue.push_back(s);
        while let Some(u) = queue.pop_front() {
            let du = row[u];
            for &v in adj.neighbors(u) {
                if row[v] == sentinel {
                    row[v] = du + 1;
                    queue.push_back(v);
                }
            }
        }
    }
    HopMatrix { n, hops }
}

/// Global efficiency from a histogram of ordered-pair hop counts:
/// `histogram[d]` is the number of ordered pairs `i ≠ j` at distance `d`.
///
/// Summing per distance makes the value depend only on the histogram, not on
/// pair enumeration order.
pub fn efficiency_from_histogram<T: Scalar>(n: usize, histogram: &[u64]) -> T {
    if n < 2 {
        return T::zero();
    }
    let mut total = T::zero();
    for (d, &count) in histogram.iter().enumerate().skip(1) {
        if count > 0 {
            total += T::of(count as f64) / T::of_usize(d);
        }
    }
    total / T::of_usize(n * (n - 1))
}

pub fn hop_histogram(hops: &HopMatrix) -> Vec<u64> {
    let n = hops.n();
    let mut hist = vec![0u64; n.max(1)];
    for i in 0..n {
        for j in 0..n {
            if i != j && hops.is_reachable(i, j) {
                hist[hops.get(i, j) as usize] += 1;
            }
        }
    }
    hist
}

/// `GE = 1/(N(N−1)) Σ_{i≠j} 1/L_ij` on hop distances; unreachable pairs add 0.
pub fn global_efficiency<T: Scalar>(adj: &Adjacency) -> T {
    let hops = hop_matrix(adj);
    efficiency_from_histogram(adj.n(), &hop_histogram(&hops))
}

/// `Σ_{(i,j)∈E} |r_ij| / Σ_{i<j} |r_ij|`.
pub fn wiring_cost<T: Scalar>(edges: impl IntoIterator<Item = (usize, usize)>, r: &CorrelationMatrix<T>) -> Result<T> {
    let total = r.total_abs_weight();
    if total == T::zero() {
        return Err(Error::DenseWeightZero);
    }
    let kept: T = edges.into_iter().map(|(i, j)| r.get(i, j).abs()).sum();
    Ok(kept / total)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Floyd–Warshall over unit weights, independent of the BFS path.
    fn floyd(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<f64>> {
        let mut d = vec![vec![f64::INFINITY; n]; n];
        for (i, row) in d.iter_mut().enumerate() {
            row[i] = 0.0;
        }
        for &(i, j) in edges {
            d[i][j] = 1.0;
            d[j][i] = 1.0;
        }
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    if d[i][k] + d[k][j] < d[i][j] {
                        d[i][j] = d[i][k] + d[k][j];
                    }
                }
            }
        }
        d
    }

    #[test]
    fn complete_and_empty() {
        let n = 5;
        let all: Vec<_> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
        assert_eq!(global_efficiency::<f64>(&Adjacency::from_edges(n, all)), 1.0);
        assert_eq!(global_efficiency::<f64>(&Adjacency::empty(n)), 0.0);
    }

    #[test]
    fn path_of_three() {
        let edges = [(0, 1), (1, 2)];
        let d = floyd(3, &edges);
        let oracle: f64 = (0..3)
            .flat_map(|i| (0..3).map(move |j| (i, j)))
            .filter(|(i, j)| i != j)
            .map(|(i, j)| 1.0 / d[i][j])
            .sum::<f64>()
            / 6.0;
        assert!((oracle - 5.0 / 6.0).abs() < 1e-15);
        let ge: f64 = global_efficiency(&Adjacency::from_edges(3, edges));
        assert!((ge - 5.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn bfs_matches_floyd_with_sentinel() {
        let edges = [(0, 1), (1, 2), (3, 4), (2, 5)];
        let h = hop_matrix(&Adjacency::from_edges(6, edges));
        let d = floyd(6, &edges);
        for i in 0..6 {
            for j in 0..6 {
                if d[i][j].is_finite() {
                    assert_eq!(h.get(i, j) as f64, d[i][j]);
                } else {
                    assert_eq!(h.get(i, j), 6);
                    assert!(!h.is_reachable(i, j));
                }
            }
        }
    }

    fn corr3() -> CorrelationMatrix<f64> {
        CorrelationMatrix::new(Tensor::from_rows(&[
            vec![1.0, 0.5, -0.3],
            vec![0.5, 1.0, 0.2],
            vec![-0.3, 0.2, 1.0],
        ]))
        .unwrap()
    }

    #[test]
    fn wiring_cost_cases() {
        let r = corr3();
        assert_eq!(wiring_cost(vec![(0, 1), (0, 2), (1, 2)], &r).unwrap(), 1.0);
        assert_eq!(wiring_cost(Vec::new(), &r).unwrap(), 0.0);
        let oracle = 0.5 / (0.5 + 0.3 + 0.2);
        assert!((wiring_cost(vec![(0, 1)], &r).unwrap() - oracle).abs() < 1e-15);
        assert!((oracle - 0.5).abs() < 1e-15);
        let z = CorrelationMatrix::new(Tensor::<f64>::identity(3)).unwrap();
        assert!(matches!(wiring_cost(vec![(0, 1)], &z), Err(Error::DenseWeightZero)));
    }
}
