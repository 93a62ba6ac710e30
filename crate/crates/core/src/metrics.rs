//! Classification metrics and partition agreement.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Area under the ROC curve by trapezoidal integration over every score
/// threshold. Equal scores across classes count one half per pair.
///
/// The trapezoid areas are accumulated as exact integers (twice the area in
/// units of one positive-negative pair), so the result equals the
/// Mann–Whitney statistic bit for bit.
pub fn auc<T: Scalar>(scores: &[T], labels: &[usize]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::ShapeMismatch(format!("{} scores, {} labels", scores.len(), labels.len())));
    }
    let pos = labels.iter().filter(|&&l| l == 1).count() as u128;
    let neg = labels.len() as u128 - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClassSplit);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap_or(std::cmp::Ordering::Equal));
    let (mut tp, mut twice_area) = (0u128, 0u128);
    let mut k = 0;
    while k < order.len() {
        let s = scores[order[k]];
        let (mut dt, mut df) = (0u128, 0u128);
        while k < order.len() && scores[order[k]] == s {
            if labels[order[k]] == 1 {
                dt += 1;
            } else {
                df += 1;
            }
            k += 1;
        }
        twice_area += df * (2 * tp + dt);
        tp += dt;
    }
    Ok(twice_area as f64 / (2 * pos * neg) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    pub fn_: usize,
}

impl Confusion {
    pub fn from_predictions(predicted: &[usize], labels: &[usize]) -> Self {
        let mut c = Confusion::default();
        for (&p, &l) in predicted.iter().zip(labels) {
            match (p == 1, l == 1) {
                (true, true) => c.tp += 1,
                (false, false) => c.tn += 1,
                (true, false) => c.fp += 1,
                (false, true) => c.fn_ += 1,
            }
        }
        c
    }

    fn ratio(a: usize, b: usize) -> f64 {
        if b == 0 {
            0.0
        } else {
            a as f64 / b as f64
        }
    }

    pub fn accuracy(&self) -> f64 {
        Self::ratio(self.tp + self.tn, self.tp + self.tn + self.fp + self.fn_)
    }

    /// `TP / (TP + FN)`; zero without positives.
    pub fn sensitivity(&self) -> f64 {
        Self::ratio(self.tp, self.tp + self.fn_)
    }

    /// `TN / (TN + FP)`; zero without negatives.
    pub fn specificity(&self) -> f64 {
        Self::ratio(self.tn, self.tn + self.fp)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Metrics {
    pub acc: f64,
    pub auc: f64,
    pub sen: f64,
    pub spe: f64,
}

impl Metrics {
    pub const NAMES: [&'static str; 4] = ["acc", "auc", "sen", "spe"];

    /// Threshold metrics on `predicted` (argmax class) and AUC on `scores`.
    pub fn compute<T: Scalar>(scores: &[T], predicted: &[usize], labels: &[usize]) -> Result<Self> {
        let c = Confusion::from_predictions(predicted, labels);
        Ok(Self {
            acc: c.accuracy(),
            auc: auc(scores, labels)?,
            sen: c.sensitivity(),
            spe: c.specificity(),
        })
    }

    pub fn values(&self) -> [f64; 4] {
        [self.acc, self.auc, self.sen, self.spe]
    }

    fn from_values(v: [f64; 4]) -> Self {
        Self {
            acc: v[0],
            auc: v[1],
            sen: v[2],
            spe: v[3],
        }
    }
}

/// Mean and sample standard deviation; the deviation is 0 for one value.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    // Shifted by the first value so identical runs give exactly (v, 0).
    let shift = values[0];
    let offset = values.iter().map(|v| v - shift).sum::<f64>() / n as f64;
    if n == 1 {
        return (shift, 0.0);
    }
    let var = values.iter().map(|v| (v - shift - offset).powi(2)).sum::<f64>() / (n - 1) as f64;
    (shift + offset, var.sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean: Metrics,
    pub std: Metrics,
    pub repeats: usize,
    /// Set when a single repeat made the deviation meaningless.
    pub single_repeat: bool,
}

impl MetricSummary {
    pub fn from_runs(runs: &[Metrics]) -> Self {
        let mut mean = [0.0; 4];
        let mut std = [0.0; 4];
        for m in 0..4 {
            let col: Vec<f64> = runs.iter().map(|r| r.values()[m]).collect();
            (mean[m], std[m]) = mean_std(&col);
        }
        if runs.len() == 1 {
            log::warn!("one repeat only; standard deviations reported as 0");
        }
        Self {
            mean: Metrics::from_values(mean),
            std: Metrics::from_values(std),
            repeats: runs.len(),
            single_repeat: runs.len() == 1,
        }
    }
}

fn choose2(n: u64) -> f64 {
    (n * n.saturating_sub(1) / 2) as f64
}

/// Adjusted Rand index between two labelings of the same items.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::ShapeMismatch(format!("{} vs {} labels", a.len(), b.len())));
    }
    let mut table: BTreeMap<(usize, usize), u64> = BTreeMap::new();
    let mut rows: BTreeMap<usize, u64> = BTreeMap::new();
    let mut cols: BTreeMap<usize, u64> = BTreeMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *table.entry((x, y)).or_default() += 1;
        *rows.entry(x).or_default() += 1;
        *cols.entry(y).or_default() += 1;
    }
    let index: f64 = table.values().map(|&n| choose2(n)).sum();
    let sum_a: f64 = rows.values().map(|&n| choose2(n)).sum();
    let sum_b: f64 = cols.values().map(|&n| choose2(n)).sum();
    let total = choose2(a.len() as u64);
    let expected = if total == 0.0 { 0.0 } else { sum_a * sum_b / total };
    let max = 0.5 * (sum_a + sum_b);
    if max == expected {
        // Both partitions trivial (all singletons or one block).
        return Ok(if index == max { 1.0 } else { 0.0 });
    }
    Ok((index - expected) / (max - expected))
}
