//! Model checkpoints.
//!
//! A checkpoint is a binary tensor file plus a JSON manifest. The binary
//! file, little endian, is: magic `BHCK`, `u32` version, `u32` tensor
//! count, then per tensor a `u32` name length, UTF-8 name, `u32` rank,
//! `u32` dims and `f64` values. The manifest lists the tensors, the model
//! configuration and the SHA-256 of the binary file, which is checked on
//! load.

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::clustering::DicePrior;
use crate::error::{Error, Result};
use crate::model::{BrainHgt, ModelConfig, ModelParams, Variant};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"BHCK";
pub const CHECKPOINT_VERSION: u32 = 1;
pub const WEIGHTS_FILE: &str = "model.bhck";
pub const MANIFEST_FILE: &str = "model.json";
const PRIOR_ENTRY: &str = "prior";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub format: String,
    pub version: u32,
    pub sha256: String,
    pub model: ModelConfig,
    pub variant: Variant,
    pub communities: Vec<String>,
    pub tensors: Vec<TensorEntry>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn encode_tensors<T: Scalar>(entries: &[(String, Tensor<T>)]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(entries.len() as u32).to_le_bytes());
    for (name, t) in entries {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(t.shape().len() as u32).to_le_bytes());
        for &d in t.shape() {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in t.data() {
            out.extend_from_slice(&v.as_f64().to_le_bytes());
        }
    }
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    at: usize,
    path: &'a Path,
}

impl Cursor<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.bytes.len() - self.at < n {
            return Err(Error::format(self.path.display(), "truncated checkpoint"));
        }
        self.at += n;
        Ok(&self.bytes[self.at - n..self.at])
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }
}

pub fn decode_tensors<T: Scalar>(bytes: &[u8], path: &Path) -> Result<Vec<(String, Tensor<T>)>> {
    let bad = |r: String| Error::format(path.display(), r);
    let mut c = Cursor { bytes, at: 0, path };
    if c.take(4)? != CHECKPOINT_MAGIC {
        return Err(bad("missing BHCK header".into()));
    }
    let version = c.u32()? as u32;
    if version != CHECKPOINT_VERSION {
        return Err(bad(format!("unsupported checkpoint version {version}")));
    }
    let count = c.u32()?;
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let len = c.u32()?;
        let name = String::from_utf8(c.take(len)?.to_vec()).map_err(|e| bad(e.to_string()))?;
        let rank = c.u32()?;
        let shape = (0..rank).map(|_| c.u32()).collect::<Result<Vec<_>>>()?;
        let n: usize = shape.iter().product();
        let data = c
            .take(n * 8)?
            .chunks_exact(8)
            .map(|b| T::of(f64::from_le_bytes(b.try_into().unwrap())))
            .collect();
        out.push((name, Tensor::new(shape, data)?));
    }
    if c.at != bytes.len() {
        return Err(bad(format!("{} trailing bytes", bytes.len() - c.at)));
    }
    Ok(out)
}

pub fn checkpoint_paths(dir: &Path) -> (PathBuf, PathBuf) {
    (dir.join(WEIGHTS_FILE), dir.join(MANIFEST_FILE))
}

/// Writes `model.bhck` and `model.json` into `dir`.
pub fn save_model<T: Scalar>(model: &BrainHgt<T>, dir: &Path) -> Result<CheckpointManifest> {
    std::fs::create_dir_all(dir)?;
    let mut entries = model.params.named();
    entries.push((PRIOR_ENTRY.to_string(), model.prior.matrix().clone()));
    let bytes = encode_tensors(&entries);
    let manifest = CheckpointManifest {
        format: "BHCK".into(),
        version: CHECKPOINT_VERSION,
        sha256: sha256_hex(&bytes),
        model: model.config.clone(),
        variant: model.variant,
        communities: model.prior.names().to_vec(),
        tensors: entries
            .iter()
            .map(|(name, t)| TensorEntry {
                name: name.clone(),
                shape: t.shape().to_vec(),
            })
            .collect(),
    };
    let (weights, json) = checkpoint_paths(dir);
    std::fs::write(weights, bytes)?;
    std::fs::write(json, serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(manifest)
}

pub fn load_model<T: Scalar>(dir: &Path) -> Result<BrainHgt<T>> {
    let (weights, json) = checkpoint_paths(dir);
    for p in [&weights, &json] {
        if !p.exists() {
            return Err(Error::MissingArtifact(p.display().to_string()));
        }
    }
    let manifest: CheckpointManifest = serde_json::from_str(&std::fs::read_to_string(&json)?)?;
    let bytes = std::fs::read(&weights)?;
    let found = sha256_hex(&bytes);
    if found != manifest.sha256 {
        return Err(Error::ChecksumMismatch {
            expected: manifest.sha256,
            found,
        });
    }
    let mut entries = decode_tensors::<T>(&bytes, &weights)?;
    let listed: Vec<TensorEntry> = entries
        .iter()
        .map(|(name, t)| TensorEntry {
            name: name.clone(),
            shape: t.shape().to_vec(),
        })
        .collect();
    if listed != manifest.tensors {
        return Err(Error::format(weights.display(), "tensor list disagrees with the manifest"));
    }
    let (name, prior) = entries.pop().ok_or_else(|| Error::format(weights.display(), "empty checkpoint"))?;
    if name != PRIOR_ENTRY {
        return Err(Error::format(weights.display(), "last tensor must be the prior"));
    }
    let prior = DicePrior::new(prior, manifest.communities)?;
    let mut params = ModelParams::<Tensor<T>>::init(&manifest.model, manifest.variant, prior.rois(), &mut ChaCha8Rng::seed_from_u64(0))?;
    let names: Vec<&String> = entries.iter().map(|(n, _)| n).collect();
    if params.names().iter().collect::<Vec<_>>() != names {
        return Err(Error::format(weights.display(), "parameter names do not match the model layout"));
    }
    let values: Vec<Tensor<T>> = entries.into_iter().map(|(_, t)| t).collect();
    params.assign(&values)?;
    BrainHgt::from_params(manifest.model, manifest.variant, prior, params)
}
