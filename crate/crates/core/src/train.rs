//! Training protocol: stratified splits, mini-batch Adam, best-validation
//! checkpoint selection, repeats, ablations and sweeps.
//!
//! Per-subject gradients may be computed in parallel but are always summed
//! in subject order, so results do not depend on the thread count.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clustering::{dice_prior, DicePrior};
use crate::cohort::Cohort;
use crate::error::{Error, Result};
use crate::graph::{pearson_correlation, Sparsifier};
use crate::metrics::{MetricSummary, Metrics};
use crate::model::{BrainHgt, ForwardTrace, ModelConfig, Subject, Variant};
use crate::optim::{adam_step, AdamConfig, AdamState};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitProtocol {
    pub train_frac: f64,
    pub val_frac: f64,
    pub test_frac: f64,
    pub repeats: usize,
    /// One seed per repeat; drives the split, initialization and dropout.
    pub seeds: Vec<u64>,
}

impl Default for SplitProtocol {
    fn default() -> Self {
        Self {
            train_frac: 0.7,
            val_frac: 0.1,
            test_frac: 0.2,
            repeats: 10,
            seeds: (0..10).collect(),
        }
    }
}

impl SplitProtocol {
    pub fn validate(&self) -> Result<()> {
        let fr = [self.train_frac, self.val_frac, self.test_frac];
        if fr.iter().any(|&f| !(f > 0.0 && f < 1.0)) || (fr.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::BadConfig(format!("split fractions {fr:?} must be positive and sum to 1")));
        }
        if self.repeats == 0 || self.seeds.len() != self.repeats {
            return Err(Error::BadConfig(format!("{} seeds for {} repeats", self.seeds.len(), self.repeats)));
        }
        Ok(())
    }

    pub fn single(seed: u64) -> Self {
        Self {
            repeats: 1,
            seeds: vec![seed],
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Per-class shuffled split so validation and test sets hold both classes.
pub fn stratified_split(labels: &[usize], protocol: &SplitProtocol, seed: u64) -> Result<Split> {
    protocol.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut split = Split {
        train: Vec::new(),
        val: Vec::new(),
        test: Vec::new(),
    };
    let classes = labels.iter().copied().max().map_or(0, |m| m + 1);
    for c in 0..classes {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
        if idx.is_empty() {
            continue;
        }
        if idx.len() < 3 {
            return Err(Error::BadConfig(format!("class {c} has {} subjects; need at least 3", idx.len())));
        }
        idx.shuffle(&mut rng);
        let n = idx.len() as f64;
        let n_val = ((protocol.val_frac * n).round() as usize).max(1);
        let n_test = ((protocol.test_frac * n).round() as usize).max(1);
        let n_train = idx.len().saturating_sub(n_val + n_test).max(1);
        let n_val = idx.len() - n_train - n_test;
        split.train.extend_from_slice(&idx[..n_train]);
        split.val.extend_from_slice(&idx[n_train..n_train + n_val]);
        split.test.extend_from_slice(&idx[n_train + n_val..]);
    }
    for part in [&mut split.train, &mut split.val, &mut split.test] {
        part.sort_unstable();
    }
    Ok(split)
}

/// Model-ready subjects plus the shared prior.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    pub subjects: Vec<Subject<T>>,
    pub labels: Vec<usize>,
    pub prior: DicePrior<T>,
    /// Edge density of every sparsified subject graph.
    pub densities: Vec<f64>,
}

impl<T: Scalar> Dataset<T> {
    pub fn mean_density(&self) -> f64 {
        self.densities.iter().sum::<f64>() / self.densities.len().max(1) as f64
    }
}

/// Correlation, sparsification and hop distances for every subject.
pub fn prepare_dataset<T: Scalar>(cohort: &Cohort<T>, sparsifier: Sparsifier) -> Result<Dataset<T>> {
    let graphs = cohort
        .subjects
        .par_iter()
        .map(|ts| {
            let r = pearson_correlation(ts)?;
            let g = sparsifier.apply(&r)?;
            Ok((r, g))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut subjects = Vec::with_capacity(graphs.len());
    let mut densities = Vec::with_capacity(graphs.len());
    for (r, g) in graphs {
        densities.push(g.density);
        subjects.push(Subject {
            features: r.as_tensor().clone(),
            spl: g.spl().to_tensor(),
        });
    }
    Ok(Dataset {
        subjects,
        labels: cohort.labels.clone(),
        prior: dice_prior(&cohort.roi_voxels, &cohort.network_voxels)?,
        densities,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    /// Parameter-name suffixes excluded from updates, e.g. `"hop"`.
    pub freeze: Vec<String>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            batch_size: 32,
            adam: AdamConfig::default(),
            freeze: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean training loss; NaN for epoch 0 (initialization).
    pub train_loss: f64,
    pub val_auc: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<T> {
    pub model: BrainHgt<T>,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
}

fn dropout_rng(seed: u64, epoch: usize, subject: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_d0d0);
    rng.set_stream(((epoch as u64) << 32) | subject as u64);
    rng
}

/// Forward passes in subject order.
pub fn predict<T: Scalar>(model: &BrainHgt<T>, data: &Dataset<T>, indices: &[usize]) -> Result<Vec<ForwardTrace<T>>> {
    indices.par_iter().map(|&i| model.forward(&data.subjects[i])).collect()
}

pub fn evaluate<T: Scalar>(model: &BrainHgt<T>, data: &Dataset<T>, indices: &[usize]) -> Result<Metrics> {
    if indices.is_empty() {
        return Err(Error::EmptySet("evaluation split".into()));
    }
    let traces = predict(model, data, indices)?;
    let scores: Vec<T> = traces.iter().map(ForwardTrace::score).collect();
    let predicted: Vec<usize> = traces.iter().map(ForwardTrace::predicted).collect();
    let labels: Vec<usize> = indices.iter().map(|&i| data.labels[i]).collect();
    Metrics::compute(&scores, &predicted, &labels)
}

/// Trains from `seed` and returns the parameters of the epoch with the best
/// validation AUC (earliest on ties; epoch 0 is the initialization).
pub fn train<T: Scalar>(
    model_cfg: &ModelConfig,
    variant: Variant,
    data: &Dataset<T>,
    split: &Split,
    cfg: &TrainConfig,
    seed: u64,
) -> Result<TrainOutcome<T>> {
    if cfg.batch_size == 0 || split.train.is_empty() {
        return Err(Error::BadConfig("empty training split or zero batch size".into()));
    }
    let mut model = BrainHgt::new(*model_cfg, variant, data.prior.clone(), seed)?;
    let names = model.params.names();
    let mut params = model.params.flatten();
    let mut state = AdamState::new(cfg.adam, params.iter());
    for (flag, name) in state.frozen.iter_mut().zip(&names) {
        *flag = cfg.freeze.iter().any(|s| name.ends_with(&format!(".{s}")) || name == s);
    }
    let val_auc = evaluate(&model, data, &split.val)?.auc;
    let mut history = vec![EpochRecord {
        epoch: 0,
        train_loss: f64::NAN,
        val_auc,
    }];
    let mut best = (val_auc, 0, model.params.clone());
    let mut order = split.train.clone();
    let mut shuffle = ChaCha8Rng::seed_from_u64(seed);
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut shuffle);
        let mut loss_sum = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let results = batch
                .par_iter()
                .map(|&i| {
                    let mut rng = dropout_rng(seed, epoch, i);
                    model.loss_and_grads(&data.subjects[i], data.labels[i], Some(&mut rng))
                })
                .collect::<Result<Vec<_>>>()?;
            let scale = T::one() / T::of_usize(batch.len());
            let mut total: Vec<Tensor<T>> = params.iter().map(|p| Tensor::zeros(p.shape())).collect();
            for (loss, grads) in &results {
                if !loss.is_finite() {
                    return Err(Error::Diverged { epoch });
                }
                loss_sum += loss.as_f64();
                for (acc, g) in total.iter_mut().zip(grads) {
                    acc.add_assign(g);
                }
            }
            let total: Vec<Tensor<T>> = total.iter().map(|g| g.scale(scale)).collect();
            adam_step(&mut params, &total, &mut state)?;
            if params.iter().any(|p| !p.is_finite()) {
                return Err(Error::Diverged { epoch });
            }
            model.params.assign(&params)?;
        }
        let val_auc = evaluate(&model, data, &split.val)?.auc;
        let train_loss = loss_sum / order.len() as f64;
        log::debug!("epoch {epoch}: loss {train_loss:.5}, val AUC {val_auc:.4}");
        history.push(EpochRecord {
            epoch,
            train_loss,
            val_auc,
        });
        if val_auc > best.0 {
            best = (val_auc, epoch, model.params.clone());
        }
    }
    model.params = best.2;
    Ok(TrainOutcome {
        model,
        history,
        best_epoch: best.1,
    })
}

#[derive(Debug, Clone)]
pub struct RepeatRun<T> {
    pub seed: u64,
    pub split: Split,
    pub outcome: TrainOutcome<T>,
    pub test: Metrics,
}

#[derive(Debug, Clone)]
pub struct RepeatReport<T> {
    pub runs: Vec<RepeatRun<T>>,
    pub summary: MetricSummary,
}

/// Independent resplit, retrain and test evaluation for every seed.
pub fn run_repeats<T: Scalar>(
    model_cfg: &ModelConfig,
    variant: Variant,
    data: &Dataset<T>,
    protocol: &SplitProtocol,
    cfg: &TrainConfig,
) -> Result<RepeatReport<T>> {
    protocol.validate()?;
    let mut runs = Vec::with_capacity(protocol.repeats);
    for &seed in &protocol.seeds {
        let split = stratified_split(&data.labels, protocol, seed)?;
        let outcome = train(model_cfg, variant, data, &split, cfg, seed)?;
        let test = evaluate(&outcome.model, data, &split.test)?;
        log::info!(
            "{} seed {seed}: test AUC {:.4} (best epoch {})",
            variant.name(),
            test.auc,
            outcome.best_epoch
        );
        runs.push(RepeatRun {
            seed,
            split,
            outcome,
            test,
        });
    }
    let metrics: Vec<Metrics> = runs.iter().map(|r| r.test).collect();
    Ok(RepeatReport {
        summary: MetricSummary::from_runs(&metrics),
        runs,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub hop: f64,
    pub summary: MetricSummary,
}

/// Trains with the hop threshold initialized to each value; with
/// `freeze_hop` the threshold stays fixed during training.
pub fn hop_sweep<T: Scalar>(
    values: &[f64],
    model_cfg: &ModelConfig,
    variant: Variant,
    data: &Dataset<T>,
    protocol: &SplitProtocol,
    cfg: &TrainConfig,
    freeze_hop: bool,
) -> Result<Vec<SweepRow>> {
    if values.is_empty() {
        return Err(Error::BadConfig("hop sweep needs at least one value".into()));
    }
    let mut train_cfg = cfg.clone();
    if freeze_hop && !train_cfg.freeze.iter().any(|s| s == "hop") {
        train_cfg.freeze.push("hop".into());
    }
    values
        .iter()
        .map(|&hop| {
            let mc = ModelConfig {
                hop_init: hop,
                ..*model_cfg
            };
            let report = run_repeats(&mc, variant, data, protocol, &train_cfg)?;
            Ok(SweepRow {
                hop,
                summary: report.summary,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub method: String,
    /// Requested density; `None` for OMST.
    pub density: Option<f64>,
    pub mean_density: f64,
    pub summary: MetricSummary,
}

/// OMST against percentage thresholding at each density.
pub fn sparsifier_comparison<T: Scalar>(
    cohort: &Cohort<T>,
    densities: &[f64],
    model_cfg: &ModelConfig,
    variant: Variant,
    protocol: &SplitProtocol,
    cfg: &TrainConfig,
) -> Result<Vec<ComparisonRow>> {
    if let Some(d) = densities.iter().find(|&&d| !(d > 0.0 && d <= 1.0)) {
        return Err(Error::BadConfig(format!("density {d} outside (0, 1]")));
    }
    let methods = std::iter::once(Sparsifier::Omst).chain(densities.iter().map(|&density| Sparsifier::Threshold { density }));
    methods
        .map(|s| {
            let data = prepare_dataset(cohort, s)?;
            let report = run_repeats(model_cfg, variant, &data, protocol, cfg)?;
            Ok(ComparisonRow {
                method: match s {
                    Sparsifier::Omst => "omst".into(),
                    Sparsifier::Threshold { .. } => "threshold".into(),
                },
                density: match s {
                    Sparsifier::Omst => None,
                    Sparsifier::Threshold { density } => Some(density),
                },
                mean_density: data.mean_density(),
                summary: report.summary,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cohort::{generate_synthetic_cohort, CohortConfig};

    #[test]
    fn split_is_disjoint_exhaustive_and_stratified() {
        let labels: Vec<usize> = (0..45).map(|i| i % 2).collect();
        let p = SplitProtocol::default();
        let s = stratified_split(&labels, &p, 3).unwrap();
        let mut all: Vec<usize> = s.train.iter().chain(&s.val).chain(&s.test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..45).collect::<Vec<_>>());
        for part in [&s.val, &s.test] {
            assert!(part.iter().any(|&i| labels[i] == 0) && part.iter().any(|&i| labels[i] == 1));
        }
        assert_eq!(s, stratified_split(&labels, &p, 3).unwrap());
        assert_ne!(s, stratified_split(&labels, &p, 4).unwrap());
    }

    #[test]
    fn protocol_validation() {
        let mut p = SplitProtocol::default();
        assert!(p.validate().is_ok());
        p.seeds.pop();
        assert!(p.validate().is_err());
        let p = SplitProtocol {
            test_frac: 0.3,
            ..SplitProtocol::default()
        };
        assert!(p.validate().is_err());
    }

    fn tiny_setup() -> (ModelConfig, Dataset<f64>) {
        let cohort = generate_synthetic_cohort::<f64>(&CohortConfig {
            n_subjects: 24,
            n_rois: 8,
            n_timepoints: 60,
            k_communities: 2,
            ..CohortConfig::default()
        })
        .unwrap();
        let mc = ModelConfig {
            d_model: 8,
            heads: 2,
            ffn_hidden: 8,
            communities: 2,
            cluster_heads: 2,
            mlp_hidden: 4,
            ..ModelConfig::default()
        };
        (mc, prepare_dataset(&cohort, Sparsifier::Omst).unwrap())
    }

    #[test]
    fn zero_epochs_returns_initialization() {
        let (mc, data) = tiny_setup();
        let split = stratified_split(&data.labels, &SplitProtocol::default(), 1).unwrap();
        let cfg = TrainConfig {
            epochs: 0,
            ..TrainConfig::default()
        };
        let out = train(&mc, Variant::Full, &data, &split, &cfg, 5).unwrap();
        assert_eq!(out.history.len(), 1);
        assert_eq!(out.best_epoch, 0);
        assert_eq!(
            out.model.params,
            BrainHgt::new(mc, Variant::Full, data.prior.clone(), 5).unwrap().params
        );
    }

    #[test]
    fn best_epoch_is_first_maximum_and_frozen_hop_stays() {
        let (mc, data) = tiny_setup();
        let split = stratified_split(&data.labels, &SplitProtocol::default(), 1).unwrap();
        let cfg = TrainConfig {
            epochs: 4,
            batch_size: 8,
            adam: AdamConfig {
                lr: 1e-2,
                ..AdamConfig::default()
            },
            freeze: vec!["hop".into()],
        };
        let out = train(&mc, Variant::Full, &data, &split, &cfg, 2).unwrap();
        let best = out.history.iter().map(|h| h.val_auc).fold(f64::MIN, f64::max);
        let first = out.history.iter().find(|h| h.val_auc == best).unwrap().epoch;
        assert_eq!(out.best_epoch, first);
        assert_eq!(out.model.params.layers[0].short[0].hop.data(), &[2.0]);
        let again = train(&mc, Variant::Full, &data, &split, &cfg, 2).unwrap();
        assert_eq!(out.model.params, again.model.params);
    }
}
