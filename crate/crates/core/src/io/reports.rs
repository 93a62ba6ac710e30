//! Result tables and interpretability exports.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::table::{fmt_real, write_matrix, write_table};
use crate::clustering::{community_interaction_diff, hard_labels};
use crate::error::{Error, Result};
use crate::lsra::split_branches;
use crate::metrics::{MetricSummary, Metrics};
use crate::model::{BrainHgt, Subject};
use crate::scalar::Scalar;
use crate::tensor::Tensor;
use crate::train::EpochRecord;

fn strings(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

/// One row per summary: the key columns followed by mean and standard
/// deviation of every metric and the repeat count.
pub fn write_summaries(path: &Path, keys: &[&str], rows: &[(Vec<String>, MetricSummary)]) -> Result<()> {
    let mut header = strings(keys);
    for n in Metrics::NAMES {
        header.push(format!("{n}_mean"));
        header.push(format!("{n}_std"));
    }
    header.push("repeats".into());
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|(key, s)| {
            let mut r = key.clone();
            for (m, d) in s.mean.values().into_iter().zip(s.std.values()) {
                r.push(fmt_real(m));
                r.push(fmt_real(d));
            }
            r.push(s.repeats.to_string());
            r
        })
        .collect();
    write_table(path, Some(&header), &body)
}

/// Per-run test metrics keyed by label and seed.
pub fn write_runs(path: &Path, runs: &[(String, u64, Metrics)]) -> Result<()> {
    let mut header = strings(&["label", "seed"]);
    header.extend(strings(&Metrics::NAMES));
    let body: Vec<Vec<String>> = runs
        .iter()
        .map(|(label, seed, m)| {
            [label.clone(), seed.to_string()]
                .into_iter()
                .chain(m.values().map(fmt_real))
                .collect()
        })
        .collect();
    write_table(path, Some(&header), &body)
}

/// Training curves keyed by seed.
pub fn write_histories(path: &Path, runs: &[(u64, &[EpochRecord])]) -> Result<()> {
    let rows: Vec<Vec<String>> = runs
        .iter()
        .flat_map(|(seed, h)| {
            h.iter()
                .map(move |r| vec![seed.to_string(), r.epoch.to_string(), fmt_real(r.train_loss), fmt_real(r.val_auc)])
        })
        .collect();
    write_table(path, Some(&strings(&["seed", "epoch", "train_loss", "val_auc"])), &rows)
}

/// One exported CSV file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportedFile {
    pub file: String,
    /// `attention`, `assignment`, `mean_assignment`, `community_attention`,
    /// `prior`, `community_difference`, `hard_labels` or `consensus_labels`.
    pub kind: String,
    pub subject_id: Option<usize>,
    /// `short` or `long` for attention maps.
    pub branch: Option<String>,
    pub head_count: Option<usize>,
    pub shape: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportIndex {
    pub variant: String,
    pub communities: Vec<String>,
    pub files: Vec<ExportedFile>,
}

/// Most likely community of every ROI per subject.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HardLabels {
    pub subject_id: usize,
    pub labels: Vec<usize>,
}

struct Exporter<'a> {
    dir: &'a Path,
    files: Vec<ExportedFile>,
}

impl Exporter<'_> {
    fn write<T: Scalar>(&mut self, file: String, m: &Tensor<T>, header: Option<&[String]>, entry: ExportedFile) -> Result<()> {
        write_matrix(&self.dir.join(&file), m, header)?;
        self.files.push(ExportedFile {
            file,
            shape: m.shape().to_vec(),
            ..entry
        });
        Ok(())
    }
}

fn entry(kind: &str, subject_id: Option<usize>) -> ExportedFile {
    ExportedFile {
        file: String::new(),
        kind: kind.into(),
        subject_id,
        branch: None,
        head_count: None,
        shape: Vec::new(),
    }
}

fn check_rows_on_simplex<T: Scalar>(m: &Tensor<T>, what: &str) -> Result<()> {
    for i in 0..m.rows() {
        let s: f64 = m.row(i).iter().map(|v| v.as_f64()).sum();
        if (s - 1.0).abs() > 1e-9 || m.row(i).iter().any(|v| v.as_f64() < 0.0) {
            return Err(Error::ShapeMismatch(format!("{what} row {i} sums to {s}")));
        }
    }
    Ok(())
}

/// Writes, into `dir`, last-layer attention per branch, soft assignments,
/// community attention and hard labels for each `(id, subject, label)`,
/// the prior, the mean assignment with its hard labels, and the class-1
/// minus class-0 difference of mean community attention when both classes
/// are present. `index.json` lists every file.
pub fn export_cohort<T: Scalar>(model: &BrainHgt<T>, subjects: &[(usize, &Subject<T>, usize)], dir: &Path) -> Result<ExportIndex> {
    std::fs::create_dir_all(dir)?;
    let mut ex = Exporter { dir, files: Vec::new() };
    ex.write(
        "prior.csv".into(),
        model.prior.matrix(),
        Some(model.prior.names()),
        entry("prior", None),
    )?;
    let lsra = model.config.lsra(model.variant);
    let mut hard = Vec::new();
    let mut assignments = Vec::new();
    let mut groups: [Vec<Tensor<T>>; 2] = [Vec::new(), Vec::new()];
    for &(id, s, label) in subjects {
        let trace = model.forward(s)?;
        if let Some(last) = trace.attention.last() {
            let refs: Vec<_> = last.iter().collect();
            let branches = split_branches(&refs, lsra.short_heads);
            let counts = [lsra.short_heads, lsra.long_heads()];
            for ((name, m), heads) in [("short", branches.short), ("long", branches.long)].into_iter().zip(counts) {
                if let Some(m) = m {
                    check_rows_on_simplex(&m, "attention")?;
                    let e = ExportedFile {
                        branch: Some(name.into()),
                        head_count: Some(heads),
                        ..entry("attention", Some(id))
                    };
                    ex.write(format!("subject_{id}_attention_{name}.csv"), &m, None, e)?;
                }
            }
        }
        if let Some(p) = &trace.assignment {
            check_rows_on_simplex(p, "assignment")?;
            let e = ExportedFile {
                head_count: Some(model.config.cluster_heads),
                ..entry("assignment", Some(id))
            };
            ex.write(format!("subject_{id}_assignment.csv"), p, Some(model.prior.names()), e)?;
            hard.push(HardLabels {
                subject_id: id,
                labels: hard_labels(p),
            });
            assignments.push(p.clone());
        }
        if let Some(a) = trace.community_attention {
            ex.write(
                format!("subject_{id}_community_attention.csv"),
                &a,
                None,
                entry("community_attention", Some(id)),
            )?;
            if label < 2 {
                groups[label].push(a);
            }
        }
    }
    if !groups[0].is_empty() && !groups[1].is_empty() {
        let d = community_interaction_diff(&groups[1], &groups[0])?;
        ex.write(
            "community_difference.csv".into(),
            &d,
            Some(model.prior.names()),
            entry("community_difference", None),
        )?;
    }
    if !hard.is_empty() {
        std::fs::write(dir.join("hard_labels.json"), serde_json::to_string_pretty(&hard)? + "\n")?;
        let n = model.rois();
        ex.files.push(ExportedFile {
            file: "hard_labels.json".into(),
            shape: vec![hard.len(), n],
            ..entry("hard_labels", None)
        });
        // Consensus over the exported subjects: argmax of the mean assignment.
        let mut mean = assignments[0].clone();
        for p in &assignments[1..] {
            mean.add_assign(p);
        }
        let mean = mean.scale(T::one() / T::of_usize(assignments.len()));
        ex.write(
            "mean_assignment.csv".into(),
            &mean,
            Some(model.prior.names()),
            entry("mean_assignment", None),
        )?;
        std::fs::write(
            dir.join("consensus_labels.json"),
            serde_json::to_string(&hard_labels(&mean))? + "\n",
        )?;
        ex.files.push(ExportedFile {
            file: "consensus_labels.json".into(),
            shape: vec![n],
            ..entry("consensus_labels", None)
        });
    }
    let index = ExportIndex {
        variant: model.variant.name().into(),
        communities: model.prior.names().to_vec(),
        files: ex.files,
    };
    std::fs::write(dir.join("index.json"), serde_json::to_string_pretty(&index)? + "\n")?;
    Ok(index)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clustering::DicePrior;
    use crate::io::table::read_matrix;
    use crate::model::{ModelConfig, Variant};
    use crate::tensor::Tensor;

    #[test]
    fn export_writes_distributions_and_difference() {
        let cfg = ModelConfig {
            d_model: 8,
            heads: 2,
            ffn_hidden: 8,
            communities: 2,
            cluster_heads: 2,
            mlp_hidden: 4,
            ..ModelConfig::default()
        };
        let prior = DicePrior::new(
            Tensor::from_rows(&[vec![0.9, 0.1], vec![0.2, 0.8], vec![0.5, 0.5]]),
            vec!["a".into(), "b".into()],
        )
        .unwrap();
        let model = BrainHgt::new(cfg, Variant::Full, prior, 1).unwrap();
        let spl = Tensor::from_rows(&[vec![0.0, 1.0, 2.0], vec![1.0, 0.0, 1.0], vec![2.0, 1.0, 0.0]]);
        let s0 = Subject {
            features: Tensor::from_rows(&[vec![1.0, 0.3, -0.2], vec![0.3, 1.0, 0.5], vec![-0.2, 0.5, 1.0]]),
            spl: spl.clone(),
        };
        let s1 = Subject {
            features: Tensor::from_rows(&[vec![1.0, -0.6, 0.1], vec![-0.6, 1.0, 0.2], vec![0.1, 0.2, 1.0]]),
            spl,
        };
        let dir = tempfile::tempdir().unwrap();
        let idx = export_cohort(&model, &[(5, &s0, 0), (9, &s1, 1)], dir.path()).unwrap();
        for f in &idx.files {
            assert!(dir.path().join(&f.file).is_file(), "{}", f.file);
            if f.file.ends_with(".json") {
                continue;
            }
            let (m, _) = read_matrix::<f64>(&dir.path().join(&f.file)).unwrap();
            assert_eq!(m.shape(), f.shape.as_slice());
            if matches!(f.kind.as_str(), "attention" | "assignment" | "mean_assignment") {
                for i in 0..m.rows() {
                    assert!((m.row(i).iter().sum::<f64>() - 1.0).abs() < 1e-9);
                }
            }
        }
        let kinds: Vec<&str> = idx.files.iter().map(|f| f.kind.as_str()).collect();
        assert_eq!(kinds.iter().filter(|k| **k == "attention").count(), 4);
        // Recompute the difference from two independent forward passes.
        let a1 = model.forward(&s1).unwrap().community_attention.unwrap();
        let a0 = model.forward(&s0).unwrap().community_attention.unwrap();
        let (d, _) = read_matrix::<f64>(&dir.path().join("community_difference.csv")).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert_eq!(d.at(i, j), a1.at(i, j) - a0.at(i, j));
            }
        }
        let hard: Vec<HardLabels> = serde_json::from_str(&std::fs::read_to_string(dir.path().join("hard_labels.json")).unwrap()).unwrap();
        assert_eq!(hard.len(), 2);
        let p0 = model.forward(&s0).unwrap().assignment.unwrap();
        let p1 = model.forward(&s1).unwrap().assignment.unwrap();
        let consensus: Vec<usize> =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("consensus_labels.json")).unwrap()).unwrap();
        for (i, &c) in consensus.iter().enumerate() {
            let m: Vec<f64> = (0..2).map(|k| p0.at(i, k) + p1.at(i, k)).collect();
            assert!(m[c] >= m[1 - c]);
        }
    }

    #[test]
    fn summary_table_layout() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.csv");
        let m = Metrics {
            acc: 1.0,
            auc: 0.5,
            sen: 0.25,
            spe: 0.0,
        };
        write_summaries(&p, &["label"], &[(vec!["full".into()], MetricSummary::from_runs(&[m]))]).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("label,acc_mean,acc_std,auc_mean"));
        assert_eq!(text.lines().count(), 2);
    }
}
