//! Sparse graphs as `i,j,weight` edge lists with a JSON sidecar holding the
//! selection statistics.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::table::{fmt_real, write_table};
use crate::error::{Error, Result};
use crate::graph::SparseBrainGraph;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphSidecar {
    pub nodes: usize,
    pub edges: usize,
    pub density: f64,
    pub ge: f64,
    pub cost: f64,
    pub objective: f64,
}

pub fn sidecar_path(edges_csv: &Path) -> PathBuf {
    edges_csv.with_extension("json")
}

/// Writes the edge list (`i < j`, sorted) and its sidecar next to it.
pub fn write_graph<T: Scalar>(path: &Path, g: &SparseBrainGraph<T>) -> Result<GraphSidecar> {
    let header: Vec<String> = ["i", "j", "weight"].iter().map(|s| s.to_string()).collect();
    let rows: Vec<Vec<String>> = g
        .edge_weights()
        .iter()
        .map(|(&(i, j), w)| vec![i.to_string(), j.to_string(), fmt_real(w.as_f64())])
        .collect();
    write_table(path, Some(&header), &rows)?;
    let side = GraphSidecar {
        nodes: g.n(),
        edges: g.edge_count(),
        density: g.density,
        ge: g.ge.as_f64(),
        cost: g.cost.as_f64(),
        objective: g.objective.as_f64(),
    };
    std::fs::write(sidecar_path(path), serde_json::to_string_pretty(&side)? + "\n")?;
    Ok(side)
}

pub fn read_edges(path: &Path) -> Result<Vec<(usize, usize, f64)>> {
    let mut r = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::format(path.display(), e.to_string()))?;
    let mut out = Vec::new();
    for rec in r.deserialize() {
        out.push(rec.map_err(|e: csv::Error| Error::format(path.display(), e.to_string()))?);
    }
    Ok(out)
}

pub fn read_sidecar(path: &Path) -> Result<GraphSidecar> {
    Ok(serde_json::from_str(&std::fs::read_to_string(sidecar_path(path))?)?)
}
