//! Brain graph construction: Pearson correlation, inverse-correlation
//! distances, orthogonal minimum spanning trees, cost-efficiency selection,
//! hop-distance matrices and the threshold baseline.
//!
//! Everything here is a pure function of its inputs.

mod correlation;
mod efficiency;
mod mst;
mod sparsify;

pub use correlation::{pearson_correlation, CorrelationMatrix, TimeSeriesMatrix};
pub use efficiency::{efficiency_from_histogram, global_efficiency, hop_histogram, hop_matrix, wiring_cost, Adjacency, HopMatrix};
pub use mst::{
    default_max_trees, inverse_distance_graph, kruskal, kruskal_order, orthogonal_msts, InverseWeightedGraph, MstSequence, UnionFind,
    WeightedEdge,
};
pub use sparsify::{omst_sparsify, omst_sparsify_with, prefix_objectives, threshold_sparsify, SparseBrainGraph};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::scalar::Scalar;

/// Sparsification method used to build subject graphs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum Sparsifier {
    Omst,
    Threshold { density: f64 },
}

impl Default for Sparsifier {
    fn default() -> Self {
        Sparsifier::Omst
    }
}

impl Sparsifier {
    pub fn apply<T: Scalar>(&self, r: &CorrelationMatrix<T>) -> Result<SparseBrainGraph<T>> {
        match *self {
            Sparsifier::Omst => omst_sparsify(r),
            Sparsifier::Threshold { density } => threshold_sparsify(r, density),
        }
    }

    pub fn label(&self) -> String {
        match self {
            Sparsifier::Omst => "omst".to_string(),
            Sparsifier::Threshold { density } => format!("threshold_{density}"),
        }
    }
}
