//! Per-directory run manifest.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use brainhgt::io::sha256_hex;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;

pub const CONFIG_FILE: &str = "config.json";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    /// SHA-256 of `config.json` in the same directory.
    pub config_hash: String,
    pub seed: Option<u64>,
    pub version: String,
    pub started_unix: u64,
    pub finished_unix: u64,
    /// Output paths relative to the directory.
    pub outputs: Vec<String>,
}

fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

/// Tracks a command's outputs and writes `config.json` and
/// `manifest.json` when finished.
pub struct RunRecorder {
    dir: PathBuf,
    command: String,
    seed: Option<u64>,
    started: u64,
    outputs: Vec<String>,
}

impl RunRecorder {
    pub fn start(dir: &Path, command: &str, seed: Option<u64>) -> std::io::Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            command: command.into(),
            seed,
            started: now(),
            outputs: Vec::new(),
        })
    }

    pub fn path(&mut self, name: &str) -> PathBuf {
        self.outputs.push(name.to_string());
        self.dir.join(name)
    }

    pub fn record(&mut self, p: &Path) {
        let rel = p.strip_prefix(&self.dir).unwrap_or(p);
        self.outputs.push(rel.display().to_string());
    }

    pub fn finish(mut self, cfg: &ExperimentConfig) -> anyhow::Result<RunManifest> {
        let text = cfg.to_json();
        std::fs::write(self.dir.join(CONFIG_FILE), &text)?;
        self.outputs.push(CONFIG_FILE.into());
        let m = RunManifest {
            command: self.command,
            config_hash: sha256_hex(text.as_bytes()),
            seed: self.seed,
            version: env!("CARGO_PKG_VERSION").into(),
            started_unix: self.started,
            finished_unix: now(),
            outputs: self.outputs,
        };
        std::fs::write(self.dir.join(MANIFEST_FILE), serde_json::to_string_pretty(&m)? + "\n")?;
        Ok(m)
    }
}
