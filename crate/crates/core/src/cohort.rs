//! Synthetic cohorts with planted communities and a class effect.
//!
//! ROIs are split into `K` contiguous communities. Each subject draws one
//! latent signal per community and every ROI follows its community's signal
//! plus independent noise. In class 1 the second community of
//! `coupled_pair` is mixed with the first, so their cross-block correlation
//! rises by roughly `class_effect / (1 + noise_sigma²)`. Labels alternate so
//! the classes stay balanced.
//!
//! With [`Layout::Ring`] the latent signals live on the ROIs themselves,
//! arranged in a ring: each ROI averages its own and its two ring
//! neighbours' signals, which makes correlation (and hence the sparse
//! graph) local. Class 1 then couples every ROI to the ROI `radius` steps
//! ahead, so the discriminative pairs sit `radius` hops apart.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::TimeSeriesMatrix;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Layout {
    #[default]
    Blocks,
    Ring {
        radius: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CohortConfig {
    pub n_subjects: usize,
    pub n_rois: usize,
    pub n_timepoints: usize,
    pub k_communities: usize,
    /// Mixing weight in `[0, 1)` of the class-1 coupling.
    pub class_effect: f64,
    pub noise_sigma: f64,
    /// Communities coupled in class 1 (block layout).
    pub coupled_pair: (usize, usize),
    /// Draw the sign of the class-1 coupling per subject.
    pub random_sign: bool,
    pub layout: Layout,
    pub voxels_per_roi: usize,
    /// Fraction of each ROI's voxels taken from its own network.
    pub prior_purity: f64,
    pub seed: u64,
}

impl Default for CohortConfig {
    fn default() -> Self {
        Self {
            n_subjects: 200,
            n_rois: 30,
            n_timepoints: 120,
            k_communities: 4,
            class_effect: 0.5,
            noise_sigma: 0.6,
            coupled_pair: (0, 1),
            random_sign: false,
            layout: Layout::Blocks,
            voxels_per_roi: 20,
            prior_purity: 0.8,
            seed: 7,
        }
    }
}

impl CohortConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::BadConfig(m));
        if self.n_subjects < 2 {
            return bad(format!("{} subjects; need at least 2", self.n_subjects));
        }
        if self.n_timepoints < 2 {
            return bad("at least 2 time points are required".into());
        }
        if self.k_communities == 0 || self.k_communities > self.n_rois {
            return bad(format!("{} communities for {} ROIs", self.k_communities, self.n_rois));
        }
        if !(0.0..1.0).contains(&self.class_effect) {
            return bad(format!("class_effect {} outside [0, 1)", self.class_effect));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad(format!("noise_sigma {}", self.noise_sigma));
        }
        let (a, b) = self.coupled_pair;
        if self.layout == Layout::Blocks && (a == b || a >= self.k_communities || b >= self.k_communities) {
            return bad(format!(
                "coupled pair {:?} for {} communities",
                self.coupled_pair, self.k_communities
            ));
        }
        if let Layout::Ring { radius } = self.layout {
            if radius == 0 || 2 * radius >= self.n_rois {
                return bad(format!("ring radius {radius} for {} ROIs", self.n_rois));
            }
        }
        if self.voxels_per_roi == 0 || !(0.0..=1.0).contains(&self.prior_purity) {
            return bad("voxels_per_roi ≥ 1 and prior_purity in [0, 1] required".into());
        }
        Ok(())
    }

    /// Contiguous community of each ROI.
    pub fn communities(&self) -> Vec<usize> {
        (0..self.n_rois).map(|i| i * self.k_communities / self.n_rois).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cohort<T> {
    pub config: CohortConfig,
    pub subjects: Vec<TimeSeriesMatrix<T>>,
    pub labels: Vec<usize>,
    /// Planted community of every ROI.
    pub communities: Vec<usize>,
    pub roi_voxels: Vec<BTreeSet<u64>>,
    pub network_voxels: Vec<BTreeSet<u64>>,
}

impl<T> Cohort<T> {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Time series of subject `s`; every subject has its own RNG stream.
fn subject_series(cfg: &CohortConfig, communities: &[usize], s: usize, label: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(s as u64 + 1);
    let (n, t) = (cfg.n_rois, cfg.n_timepoints);
    let mut rho = if label == 1 { cfg.class_effect } else { 0.0 };
    if cfg.random_sign && rng.random::<bool>() {
        rho = -rho;
    }
    let keep = (1.0 - rho * rho).sqrt();
    let mut out = vec![0.0; n * t];
    match cfg.layout {
        Layout::Blocks => {
            let k = cfg.k_communities;
            let mut z: Vec<Vec<f64>> = (0..k).map(|_| (0..t).map(|_| normal(&mut rng)).collect()).collect();
            let (a, b) = cfg.coupled_pair;
            for tt in 0..t {
                z[b][tt] = keep * z[b][tt] + rho * z[a][tt];
            }
            for i in 0..n {
                for tt in 0..t {
                    out[i * t + tt] = z[communities[i]][tt] + cfg.noise_sigma * normal(&mut rng);
                }
            }
        }
        Layout::Ring { radius } => {
            let u: Vec<Vec<f64>> = (0..n).map(|_| (0..t).map(|_| normal(&mut rng)).collect()).collect();
            let local = |i: usize, tt: usize| (u[(i + n - 1) % n][tt] + u[i][tt] + u[(i + 1) % n][tt]) / 3f64.sqrt();
            for i in 0..n {
                let partner = (i + radius) % n;
                for tt in 0..t {
                    let own = local(i, tt);
                    out[i * t + tt] = keep * own + rho * u[partner][tt] + cfg.noise_sigma * normal(&mut rng);
                }
            }
        }
    }
    out
}

/// Voxel id sets: network `c` owns a contiguous id range, and every ROI
/// takes `prior_purity` of its voxels from its own network's range and the
/// rest from the next network's range.
fn voxel_sets(cfg: &CohortConfig, communities: &[usize]) -> (Vec<BTreeSet<u64>>, Vec<BTreeSet<u64>>) {
    let k = cfg.k_communities;
    let v = cfg.voxels_per_roi;
    let own = ((cfg.prior_purity * v as f64).round() as usize).min(v);
    let sizes: Vec<usize> = (0..k).map(|c| communities.iter().filter(|&&x| x == c).count()).collect();
    let pool = sizes.iter().max().copied().unwrap_or(1) * v;
    let base = |c: usize| (c * pool) as u64;
    let networks = (0..k).map(|c| (base(c)..base(c) + pool as u64).collect()).collect();
    let mut slot = vec![0usize; k];
    let rois = communities
        .iter()
        .map(|&c| {
            let idx = slot[c];
            slot[c] += 1;
            let start = base(c) + (idx * v) as u64;
            let mut set: BTreeSet<u64> = (start..start + own as u64).collect();
            let next = (c + 1) % k;
            let foreign = base(next) + (idx * v + own) as u64;
            set.extend(foreign..foreign + (v - own) as u64);
            set
        })
        .collect();
    (rois, networks)
}

/// Deterministic in `cfg.seed`.
pub fn generate_synthetic_cohort<T: Scalar>(cfg: &CohortConfig) -> Result<Cohort<T>> {
    cfg.validate()?;
    let communities = cfg.communities();
    let labels: Vec<usize> = (0..cfg.n_subjects).map(|s| s % 2).collect();
    let subjects = labels
        .iter()
        .enumerate()
        .map(|(s, &label)| {
            let data = subject_series(cfg, &communities, s, label);
            let values = Tensor::matrix(cfg.n_rois, cfg.n_timepoints, data.into_iter().map(T::of).collect());
            TimeSeriesMatrix::new(values)
        })
        .collect::<Result<Vec<_>>>()?;
    let (roi_voxels, network_voxels) = voxel_sets(cfg, &communities);
    Ok(Cohort {
        config: cfg.clone(),
        subjects,
        labels,
        communities,
        roi_voxels,
        network_voxels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::pearson_correlation;

    fn small(effect: f64, sigma: f64) -> CohortConfig {
        CohortConfig {
            n_subjects: 20,
            n_rois: 12,
            n_timepoints: 200,
            k_communities: 3,
            class_effect: effect,
            noise_sigma: sigma,
            ..CohortConfig::default()
        }
    }

    fn mean_cross_block(c: &Cohort<f64>, s: usize) -> f64 {
        let r = pearson_correlation(&c.subjects[s]).unwrap();
        let (a, b) = c.config.coupled_pair;
        let mut acc = (0.0, 0);
        for i in 0..c.communities.len() {
            for j in 0..c.communities.len() {
                if c.communities[i] == a && c.communities[j] == b {
                    acc.0 += r.get(i, j);
                    acc.1 += 1;
                }
            }
        }
        acc.0 / acc.1 as f64
    }

    #[test]
    fn deterministic_and_balanced() {
        let a: Cohort<f64> = generate_synthetic_cohort(&small(0.5, 0.5)).unwrap();
        let b: Cohort<f64> = generate_synthetic_cohort(&small(0.5, 0.5)).unwrap();
        assert_eq!(a, b);
        let ones = a.labels.iter().filter(|&&l| l == 1).count();
        assert!((ones as i64 - (a.len() - ones) as i64).abs() <= 1);
        assert_eq!(a.communities, vec![0, 0, 0, 0, 1, 1, 1, 1, 2, 2, 2, 2]);
    }

    #[test]
    fn noiseless_strong_effect_is_separable() {
        let c: Cohort<f64> = generate_synthetic_cohort(&small(0.9, 0.0)).unwrap();
        let stats: Vec<(f64, usize)> = (0..c.len()).map(|s| (mean_cross_block(&c, s), c.labels[s])).collect();
        let max0 = stats.iter().filter(|s| s.1 == 0).map(|s| s.0).fold(f64::MIN, f64::max);
        let min1 = stats.iter().filter(|s| s.1 == 1).map(|s| s.0).fold(f64::MAX, f64::min);
        assert!(min1 > max0, "{min1} <= {max0}");
    }

    #[test]
    fn voxel_prior_prefers_own_network() {
        let c: Cohort<f64> = generate_synthetic_cohort(&small(0.0, 1.0)).unwrap();
        let prior = crate::clustering::dice_prior::<f64>(&c.roi_voxels, &c.network_voxels).unwrap();
        for (i, &k) in c.communities.iter().enumerate() {
            assert_eq!(crate::clustering::hard_labels(prior.matrix())[i], k);
        }
    }

    #[test]
    fn ring_layout_is_local() {
        let cfg = CohortConfig {
            layout: Layout::Ring { radius: 2 },
            ..small(0.0, 0.1)
        };
        let c: Cohort<f64> = generate_synthetic_cohort(&cfg).unwrap();
        let r = pearson_correlation(&c.subjects[0]).unwrap();
        assert!(r.get(0, 1) > 0.4 && r.get(0, 6).abs() < 0.3);
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(generate_synthetic_cohort::<f64>(&small(1.0, 0.5)).is_err());
        let mut cfg = small(0.5, 0.5);
        cfg.coupled_pair = (1, 1);
        assert!(generate_synthetic_cohort::<f64>(&cfg).is_err());
        cfg = small(0.5, 0.5);
        cfg.k_communities = 13;
        assert!(generate_synthetic_cohort::<f64>(&cfg).is_err());
    }
}
