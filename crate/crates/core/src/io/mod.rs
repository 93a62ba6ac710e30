//! File formats: CSV tables, binary time series, checkpoints, graph edge
//! lists, priors and interpretability exports.

pub mod checkpoint;
pub mod cohort;
pub mod graphs;
pub mod prior;
pub mod reports;
pub mod series;
pub mod table;

pub use checkpoint::{load_model, save_model, sha256_hex};
