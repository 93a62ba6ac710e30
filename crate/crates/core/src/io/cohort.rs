//! Synthetic cohorts on disk.
//!
//! Layout: `cohort.json` (generator config), `labels.csv`
//! (`subject,label`), `communities.json` (planted community per ROI),
//! `voxels.json` (see [`super::prior`]) and `subjects/subject_NNNN.bin`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::prior::{read_voxels, write_voxels, VoxelFile};
use super::series::{read_series, write_series};
use super::table::write_table;
use crate::clustering::default_names;
use crate::cohort::{Cohort, CohortConfig};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommunityFile {
    pub communities: Vec<usize>,
}

pub fn subject_file(dir: &Path, i: usize) -> PathBuf {
    dir.join("subjects").join(format!("subject_{i:04}.bin"))
}

/// Writes the cohort and returns the paths written.
pub fn write_cohort<T: Scalar>(dir: &Path, cohort: &Cohort<T>) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir.join("subjects"))?;
    let mut written = Vec::new();
    for (i, ts) in cohort.subjects.iter().enumerate() {
        let p = subject_file(dir, i);
        write_series(&p, ts)?;
        written.push(p);
    }
    let labels = dir.join("labels.csv");
    let rows: Vec<Vec<String>> = cohort
        .labels
        .iter()
        .enumerate()
        .map(|(i, l)| vec![i.to_string(), l.to_string()])
        .collect();
    write_table(&labels, Some(&["subject".to_string(), "label".to_string()]), &rows)?;
    written.push(labels);
    let json = |name: &str, text: String| -> Result<PathBuf> {
        let p = dir.join(name);
        std::fs::write(&p, text + "\n")?;
        Ok(p)
    };
    written.push(json("cohort.json", serde_json::to_string_pretty(&cohort.config)?)?);
    written.push(json(
        "communities.json",
        serde_json::to_string(&CommunityFile {
            communities: cohort.communities.clone(),
        })?,
    )?);
    let voxels = dir.join("voxels.json");
    let names = default_names(cohort.network_voxels.len());
    write_voxels(&voxels, &VoxelFile::new(&cohort.roi_voxels, &cohort.network_voxels, &names))?;
    written.push(voxels);
    Ok(written)
}

fn require(p: PathBuf) -> Result<PathBuf> {
    if p.exists() {
        Ok(p)
    } else {
        Err(Error::MissingArtifact(p.display().to_string()))
    }
}

pub fn read_cohort<T: Scalar>(dir: &Path) -> Result<Cohort<T>> {
    let config: CohortConfig = serde_json::from_str(&std::fs::read_to_string(require(dir.join("cohort.json"))?)?)?;
    let labels_path = require(dir.join("labels.csv"))?;
    let mut r = csv::Reader::from_path(&labels_path).map_err(|e| Error::format(labels_path.display(), e.to_string()))?;
    let mut labels = Vec::new();
    for (k, rec) in r.deserialize::<(usize, usize)>().enumerate() {
        let (i, l) = rec.map_err(|e| Error::format(labels_path.display(), e.to_string()))?;
        if i != k {
            return Err(Error::format(labels_path.display(), format!("subject {i} out of order")));
        }
        labels.push(l);
    }
    let subjects = (0..labels.len())
        .map(|i| read_series(&require(subject_file(dir, i))?))
        .collect::<Result<Vec<_>>>()?;
    let communities: CommunityFile = serde_json::from_str(&std::fs::read_to_string(require(dir.join("communities.json"))?)?)?;
    let voxels = read_voxels(&require(dir.join("voxels.json"))?)?;
    let mut rois = voxels.rois;
    rois.sort_by_key(|r| r.id);
    Ok(Cohort {
        config,
        subjects,
        labels,
        communities: communities.communities,
        roi_voxels: rois.into_iter().map(|r| r.voxels).collect(),
        network_voxels: voxels.networks.into_iter().map(|n| n.voxels).collect(),
    })
}
