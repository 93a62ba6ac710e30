//! Experiment configuration file.

use std::path::{Path, PathBuf};

use brainhgt::cohort::CohortConfig;
use brainhgt::graph::Sparsifier;
use brainhgt::train::{SplitProtocol, TrainConfig};
use brainhgt::{Error, ModelConfig, Variant};
use serde::{Deserialize, Serialize};

/// Everything a run depends on. Missing sections take their defaults.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub cohort: CohortConfig,
    /// Cohort directory written by `generate`; when unset the cohort is
    /// synthesized in memory from `cohort`.
    pub cohort_dir: Option<PathBuf>,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub protocol: SplitProtocol,
    pub sparsifier: Sparsifier,
    pub variant: Variant,
    pub hops: Vec<f64>,
    pub densities: Vec<f64>,
    /// Keep the hop threshold fixed at its initial value during sweeps.
    pub freeze_hop: Option<bool>,
}

impl ExperimentConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, Error> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
        serde_json::from_str(&text).map_err(|e| Error::BadConfig(format!("{}: {e}", path.display())))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes") + "\n"
    }
}
