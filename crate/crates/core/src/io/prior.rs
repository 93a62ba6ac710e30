//! Prior matrices and voxel membership files.
//!
//! Voxel files are JSON of the form
//! `{"rois": [{"id": 0, "voxels": [..]}], "networks": [{"name": "DMN", "voxels": [..]}]}`.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::table::{read_matrix, write_matrix};
use crate::clustering::{default_names, dice_prior, DicePrior};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoiVoxels {
    pub id: usize,
    pub voxels: BTreeSet<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkVoxels {
    pub name: String,
    pub voxels: BTreeSet<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoxelFile {
    pub rois: Vec<RoiVoxels>,
    pub networks: Vec<NetworkVoxels>,
}

impl VoxelFile {
    pub fn new(rois: &[BTreeSet<u64>], networks: &[BTreeSet<u64>], names: &[String]) -> Self {
        Self {
            rois: rois.iter().enumerate().map(|(id, v)| RoiVoxels { id, voxels: v.clone() }).collect(),
            networks: networks
                .iter()
                .zip(names)
                .map(|(v, name)| NetworkVoxels {
                    name: name.clone(),
                    voxels: v.clone(),
                })
                .collect(),
        }
    }

    /// Dice prior with ROIs ordered by id. Ids must be `0..N`.
    pub fn prior<T: Scalar>(&self) -> Result<DicePrior<T>> {
        let mut rois: Vec<&RoiVoxels> = self.rois.iter().collect();
        rois.sort_by_key(|r| r.id);
        if rois.iter().enumerate().any(|(k, r)| r.id != k) {
            return Err(Error::BadConfig("ROI ids must be 0..N without gaps".into()));
        }
        let roi_sets: Vec<BTreeSet<u64>> = rois.iter().map(|r| r.voxels.clone()).collect();
        let net_sets: Vec<BTreeSet<u64>> = self.networks.iter().map(|n| n.voxels.clone()).collect();
        let p = dice_prior::<T>(&roi_sets, &net_sets)?;
        DicePrior::new(p.matrix().clone(), self.networks.iter().map(|n| n.name.clone()).collect())
    }
}

pub fn write_voxels(path: &Path, file: &VoxelFile) -> Result<()> {
    std::fs::write(path, serde_json::to_string(file)? + "\n")?;
    Ok(())
}

pub fn read_voxels(path: &Path) -> Result<VoxelFile> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

pub fn write_prior<T: Scalar>(path: &Path, prior: &DicePrior<T>) -> Result<()> {
    write_matrix(path, prior.matrix(), Some(prior.names()))
}

/// Loads a `.json` voxel file or an `N × K` CSV matrix (header optional).
pub fn read_prior<T: Scalar>(path: &Path) -> Result<DicePrior<T>> {
    if path.extension().is_some_and(|e| e == "json") {
        return read_voxels(path)?.prior();
    }
    let (m, header) = read_matrix::<T>(path)?;
    let names = header.unwrap_or_else(|| default_names(m.cols()));
    if names.len() != m.cols() {
        return Err(Error::format(
            path.display(),
            format!("{} names for {} columns", names.len(), m.cols()),
        ));
    }
    DicePrior::new(m, names)
}
