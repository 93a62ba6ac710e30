//! Whole-model gradient check against central differences.

use brainhgt::cohort::{generate_synthetic_cohort, CohortConfig};
use brainhgt::graph::Sparsifier;
use brainhgt::model::{BrainHgt, ModelConfig, Variant};
use brainhgt::train::prepare_dataset;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct GateReport {
    /// Relative error per parameter tensor.
    pub errors: Vec<(String, f64)>,
    /// Analytic gradient norm per parameter tensor.
    pub norms: Vec<(String, f64)>,
}

impl GateReport {
    pub fn worst(&self) -> (String, f64) {
        self.errors
            .iter()
            .cloned()
            .fold((String::new(), 0.0), |a, b| if b.1 > a.1 { b } else { a })
    }
}

pub fn gate_config() -> ModelConfig {
    ModelConfig {
        d_model: 8,
        heads: 2,
        ffn_hidden: 12,
        communities: 3,
        cluster_heads: 2,
        mlp_hidden: 6,
        ..ModelConfig::default()
    }
}

/// Analytic gradients of a 6-ROI, 3-community subject compared with central
/// differences, one tensor at a time. The subject graph is a 40% threshold
/// graph; OMST keeps nearly every edge at this size, leaving the mask idle.
///
/// Hop thresholds sit strictly between path lengths 1 and 2, so the mask
/// is active on every two-hop pair and its ReLU never sits on a kink.
pub fn run(variant: Variant, seed: u64) -> GateReport {
    let cohort = generate_synthetic_cohort::<f64>(&CohortConfig {
        n_subjects: 2,
        n_rois: 6,
        n_timepoints: 40,
        k_communities: 3,
        seed,
        ..CohortConfig::default()
    })
    .unwrap();
    let data = prepare_dataset(&cohort, Sparsifier::Threshold { density: 0.4 }).unwrap();
    let mut model = BrainHgt::new(gate_config(), variant, data.prior.clone(), seed).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    for layer in &mut model.params.layers {
        for head in &mut layer.short {
            head.hop.data_mut()[0] = 1.4 + rng.random_range(-0.2..0.2);
            head.gamma_raw.data_mut()[0] = rng.random_range(-1.0..1.0);
        }
    }
    let subject = &data.subjects[0];
    assert!(subject.spl.data().iter().any(|&s| s >= 2.0), "gate subject has no two-hop pairs");
    let label = data.labels[0];
    let (_, grads) = model.loss_and_grads(subject, label, None).unwrap();
    let names = model.params.names();
    let mut flat = model.params.flatten();
    let h = 1e-6;
    let mut errors = Vec::new();
    let mut norms = Vec::new();
    for (t, name) in names.iter().enumerate() {
        let mut fd = vec![0.0; flat[t].len()];
        for (i, slot) in fd.iter_mut().enumerate() {
            let orig = flat[t].data()[i];
            let mut eval = |v: f64| {
                flat[t].data_mut()[i] = v;
                model.params.assign(&flat).unwrap();
                model.loss(subject, label).unwrap()
            };
            let (up, down) = (eval(orig + h), eval(orig - h));
            flat[t].data_mut()[i] = orig;
            *slot = (up - down) / (2.0 * h);
        }
        model.params.assign(&flat).unwrap();
        let analytic = grads[t].data();
        let diff: f64 = analytic.iter().zip(&fd).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let scale = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let denom = scale(analytic).max(scale(&fd)).max(1e-8);
        errors.push((name.clone(), diff / denom));
        norms.push((name.clone(), scale(analytic)));
    }
    GateReport { errors, norms }
}
