//! Slow, independent reference implementations used as test oracles.
#![allow(dead_code)]

use std::collections::BTreeSet;

/// 1.5-entmax by bisection on the threshold `τ` of
/// `p_i = max(0, z_i/2 − τ)²`, `Σ p = 1`.
pub fn entmax15_bisect(z: &[f64]) -> Vec<f64> {
    let top = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max) / 2.0;
    let mass = |tau: f64| z.iter().map(|&v| (v / 2.0 - tau).max(0.0).powi(2)).sum::<f64>();
    // mass(top − 1) ≥ 1 and mass(top) = 0.
    let (mut lo, mut hi) = (top - 1.0, top);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if mass(mid) >= 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    z.iter().map(|&v| (v / 2.0 - lo).max(0.0).powi(2)).collect()
}

/// All-pairs hop counts by Floyd–Warshall; unreachable pairs get `n`.
pub fn hops_floyd(n: usize, edges: &BTreeSet<(usize, usize)>) -> Vec<Vec<usize>> {
    let inf = usize::MAX / 4;
    let mut d = vec![vec![inf; n]; n];
    for (i, row) in d.iter_mut().enumerate() {
        row[i] = 0;
    }
    for &(i, j) in edges {
        d[i][j] = 1;
        d[j][i] = 1;
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
    for row in &mut d {
        for v in row.iter_mut() {
            if *v >= inf {
                *v = n;
            }
        }
    }
    d
}

/// Mean inverse hop distance over ordered pairs; unreachable pairs add 0.
pub fn global_efficiency(n: usize, edges: &BTreeSet<(usize, usize)>) -> f64 {
    if n < 2 {
        return 0.0;
    }
    let d = hops_floyd(n, edges);
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j && d[i][j] < n {
                s += 1.0 / d[i][j] as f64;
            }
        }
    }
    s / (n * (n - 1)) as f64
}

/// Minimum spanning forest by Prim's algorithm on distances `1/|r|` over
/// the `available` pairs, with edges returned in ascending distance.
fn prim_forest(r: &[Vec<f64>], available: &BTreeSet<(usize, usize)>) -> Vec<(usize, usize)> {
    let n = r.len();
    let dist = |i: usize, j: usize| 1.0 / r[i][j].abs();
    let mut seen = vec![false; n];
    let mut edges = Vec::new();
    for root in 0..n {
        if seen[root] {
            continue;
        }
        seen[root] = true;
        loop {
            let mut best: Option<(f64, usize, usize)> = None;
            for &(i, j) in available {
                if seen[i] != seen[j] && best.is_none_or(|b| dist(i, j) < b.0) {
                    best = Some((dist(i, j), i, j));
                }
            }
            match best {
                Some((_, i, j)) => {
                    seen[i] = true;
                    seen[j] = true;
                    edges.push((i, j));
                }
                None => break,
            }
        }
    }
    edges.sort_by(|a, b| dist(a.0, a.1).partial_cmp(&dist(b.0, b.1)).unwrap().then(a.cmp(b)));
    edges
}

/// Orthogonal MSTs by repeated Prim on the residual graph, then the edge
/// prefix maximising `GE − Cost`, each prefix evaluated from scratch.
/// Assumes distinct nonzero |r| so the forests are unique.
pub fn omst_bruteforce(r: &[Vec<f64>]) -> BTreeSet<(usize, usize)> {
    let n = r.len();
    let mut residual: BTreeSet<(usize, usize)> = BTreeSet::new();
    let mut total = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            if r[i][j] != 0.0 {
                residual.insert((i, j));
                total += r[i][j].abs();
            }
        }
    }
    let budget = residual.len() / (n - 1) + 1;
    let mut order = Vec::new();
    for _ in 0..budget {
        if residual.is_empty() {
            break;
        }
        let tree = prim_forest(r, &residual);
        for e in &tree {
            residual.remove(e);
        }
        order.extend(tree);
    }
    let mut best = (f64::NEG_INFINITY, 0);
    for k in 0..order.len() {
        let kept: BTreeSet<(usize, usize)> = order[..=k].iter().copied().collect();
        let cost = kept.iter().map(|&(i, j)| r[i][j].abs()).sum::<f64>() / total;
        let obj = global_efficiency(n, &kept) - cost;
        if obj > best.0 {
            best = (obj, k);
        }
    }
    order[..=best.1].iter().copied().collect()
}

/// AUC as the fraction of positive-negative pairs ranked correctly, ties
/// counting one half.
pub fn auc_pairs(scores: &[f64], labels: &[usize]) -> f64 {
    let (mut twice, mut pairs) = (0u64, 0u64);
    for (i, &li) in labels.iter().enumerate() {
        for (j, &lj) in labels.iter().enumerate() {
            if li == 1 && lj == 0 {
                pairs += 1;
                twice += if scores[i] > scores[j] {
                    2
                } else if scores[i] == scores[j] {
                    1
                } else {
                    0
                };
            }
        }
    }
    twice as f64 / (2 * pairs) as f64
}

/// Dice coefficient `2|A∩B| / (|A|+|B|)`.
pub fn dice(a: &BTreeSet<u64>, b: &BTreeSet<u64>) -> f64 {
    2.0 * a.intersection(b).count() as f64 / (a.len() + b.len()) as f64
}
pub mod gate;
