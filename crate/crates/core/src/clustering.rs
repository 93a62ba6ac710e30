//! Prior-guided grouping of ROIs into communities.
//!
//! Learnable prototypes `C` (K × d) query the encoded nodes. Energies are
//! multiplied by a Dice overlap prior, each ROI spreads unit mass over the
//! communities with entmax-1.5, and community features are the assignment
//! weighted sums of node values. A self-attention block then refines the K
//! community rows and an MLP classifies their mean.

use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Graph, Var};
use crate::error::{Error, Result};
use crate::init::{gram_schmidt, xavier_uniform_with};
use crate::lsra::{block_tail, multi_head_attention, Dropout, MaskMode};
use crate::params::{bind_const, AttentionParams, ClusterParams, FeedForwardParams, MlpParams};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Value that replaces every entry of a prior row with no overlap at all.
pub const PRIOR_FLOOR: f64 = 1e-3;

/// `N × K` Dice overlaps between ROIs and reference networks.
#[derive(Debug, Clone, PartialEq)]
pub struct DicePrior<T> {
    matrix: Tensor<T>,
    names: Vec<String>,
}

impl<T: Scalar> DicePrior<T> {
    /// Validates entries in `[0, 1]`; all-zero rows are floored to [`PRIOR_FLOOR`].
    pub fn new(mut matrix: Tensor<T>, names: Vec<String>) -> Result<Self> {
        if matrix.shape().len() != 2 || names.len() != matrix.cols() {
            return Err(Error::ShapeMismatch(format!(
                "prior {:?} with {} community names",
                matrix.shape(),
                names.len()
            )));
        }
        if matrix.data().iter().any(|&v| !(v >= T::zero() && v <= T::one())) {
            return Err(Error::BadConfig("prior entries must lie in [0, 1]".into()));
        }
        for i in 0..matrix.rows() {
            let row = matrix.row_mut(i);
            if row.iter().all(|&v| v == T::zero()) {
                row.iter_mut().for_each(|v| *v = T::of(PRIOR_FLOOR));
                log::debug!("prior row {i} has no overlap; floored");
            }
        }
        Ok(Self { matrix, names })
    }

    /// All-ones prior; leaves the energies unmodulated.
    pub fn uniform(n: usize, k: usize) -> Self {
        Self {
            matrix: Tensor::full(&[n, k], T::one()),
            names: default_names(k),
        }
    }

    pub fn matrix(&self) -> &Tensor<T> {
        &self.matrix
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn rois(&self) -> usize {
        self.matrix.rows()
    }

    pub fn communities(&self) -> usize {
        self.matrix.cols()
    }
}

pub fn default_names(k: usize) -> Vec<String> {
    (0..k).map(|c| format!("community{c}")).collect()
}

/// Which EmptySet argument was empty.
fn empty(kind: &str, idx: usize) -> Error {
    Error::EmptySet(format!("{kind} {idx}"))
}

/// `D[i,k] = 2|G_i ∩ F_k| / (|G_i| + |F_k|)`.
pub fn dice_prior<T: Scalar>(roi_voxels: &[BTreeSet<u64>], network_voxels: &[BTreeSet<u64>]) -> Result<DicePrior<T>> {
    if let Some(i) = roi_voxels.iter().position(BTreeSet::is_empty) {
        return Err(empty("roi", i));
    }
    if let Some(k) = network_voxels.iter().position(BTreeSet::is_empty) {
        return Err(empty("network", k));
    }
    let (n, k) = (roi_voxels.len(), network_voxels.len());
    let mut m = Tensor::zeros(&[n, k]);
    for (i, g) in roi_voxels.iter().enumerate() {
        for (c, f) in network_voxels.iter().enumerate() {
            let overlap = g.intersection(f).count();
            m.set(i, c, T::of_usize(2 * overlap) / T::of_usize(g.len() + f.len()));
        }
    }
    DicePrior::new(m, default_names(k))
}

/// Normaliser used for the per-ROI community distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssignmentFn {
    #[default]
    Entmax15,
    Softmax,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterConfig {
    pub d_model: usize,
    pub communities: usize,
    /// Heads of the prototype cross-attention; all share one prior.
    pub heads: usize,
    pub refine_heads: usize,
    pub ffn_hidden: usize,
    pub dropout: f64,
    pub assignment: AssignmentFn,
    pub ln_eps: f64,
}

impl ClusterConfig {
    pub fn validate(&self) -> Result<()> {
        if self.communities == 0 {
            return Err(Error::BadConfig("at least one community is required".into()));
        }
        if self.communities > self.d_model {
            return Err(Error::BadConfig(format!(
                "{} prototypes cannot be orthogonal in {} dimensions",
                self.communities, self.d_model
            )));
        }
        for h in [self.heads, self.refine_heads] {
            if h == 0 || self.d_model % h != 0 {
                return Err(Error::BadConfig(format!("d_model {} not divisible by {h} heads", self.d_model)));
            }
        }
        Ok(())
    }
}

pub fn init_cluster_params<T: Scalar, R: Rng>(cfg: &ClusterConfig, rng: &mut R) -> Result<ClusterParams<Tensor<T>>> {
    let d = cfg.d_model;
    let raw = xavier_uniform_with(&[cfg.communities, d], rng)?;
    Ok(ClusterParams {
        prototypes: gram_schmidt(&raw)?,
        wq: xavier_uniform_with(&[d, d], rng)?,
        wk: xavier_uniform_with(&[d, d], rng)?,
        wv: xavier_uniform_with(&[d, d], rng)?,
        refine_attn: AttentionParams::init(d, rng)?,
        refine_ffn: FeedForwardParams::init(d, cfg.ffn_hidden, rng)?,
    })
}

/// Cross-attention on the graph. `prior` must be an `N × K` constant.
/// Returns community features (K × d) and per-head assignments (N × K).
pub(crate) fn cross_attention<T: Scalar>(
    g: &mut Graph<T>,
    x: Var,
    prior: Var,
    p: &ClusterParams<Var>,
    cfg: &ClusterConfig,
) -> (Var, Vec<Var>) {
    let dh = cfg.d_model / cfg.heads;
    let cq = g.matmul(p.prototypes, p.wq);
    let xk = g.matmul(x, p.wk);
    let xv = g.matmul(x, p.wv);
    let inv = T::one() / T::of_usize(dh).sqrt();
    let mut feats = Vec::with_capacity(cfg.heads);
    let mut probs = Vec::with_capacity(cfg.heads);
    for h in 0..cfg.heads {
        let (lo, hi) = (h * dh, (h + 1) * dh);
        let q = g.slice_cols(cq, lo, hi);
        let k = g.slice_cols(xk, lo, hi);
        let v = g.slice_cols(xv, lo, hi);
        let raw = g.matmul_t(k, q);
        let e = g.scale(raw, inv);
        let e = g.mul(e, prior);
        let a = match cfg.assignment {
            AssignmentFn::Entmax15 => g.entmax15_rows(e),
            AssignmentFn::Softmax => g.softmax_rows(e),
        };
        let at = g.transpose(a);
        feats.push(g.matmul(at, v));
        probs.push(a);
    }
    let xc = if feats.len() == 1 { feats[0] } else { g.concat_cols(&feats) };
    (xc, probs)
}

/// Self-attention over community rows; dropout only after the FFN.
pub(crate) fn refine<T: Scalar>(
    g: &mut Graph<T>,
    xc: Var,
    p: &ClusterParams<Var>,
    cfg: &ClusterConfig,
    dropout: &mut Dropout<'_>,
) -> (Var, Vec<Var>) {
    let (attn, probs) = multi_head_attention(g, xc, xc, &p.refine_attn, cfg.refine_heads, &[], None, MaskMode::default());
    let out = block_tail(g, xc, attn, &p.refine_ffn, T::of(cfg.ln_eps), false, dropout);
    (out, probs)
}

/// Mean over rows, then `hidden` ReLU units, then raw logits.
pub(crate) fn readout<T: Scalar>(g: &mut Graph<T>, x: Var, p: &MlpParams<Var>) -> Var {
    let m = g.mean_rows(x);
    let h = g.matmul(m, p.w1);
    let h = g.add_row(h, p.b1);
    let h = g.relu(h);
    let o = g.matmul(h, p.w2);
    g.add_row(o, p.b2)
}

/// Output of [`prior_cross_attention`].
#[derive(Debug, Clone, PartialEq)]
pub struct CrossAttention<T> {
    /// Head-averaged assignment, `N × K`.
    pub assignment: Tensor<T>,
    pub per_head: Vec<Tensor<T>>,
    /// Community features, `K × d`.
    pub features: Tensor<T>,
}

pub fn prior_cross_attention<T: Scalar>(
    x_ls: &Tensor<T>,
    prior: &DicePrior<T>,
    params: &ClusterParams<Tensor<T>>,
    cfg: &ClusterConfig,
) -> Result<CrossAttention<T>> {
    cfg.validate()?;
    let k = params.prototypes.rows();
    if x_ls.cols() != cfg.d_model || prior.rois() != x_ls.rows() || prior.communities() != k || params.prototypes.cols() != cfg.d_model {
        return Err(Error::ShapeMismatch(format!(
            "nodes {:?}, prior {:?}, prototypes {:?}",
            x_ls.shape(),
            prior.matrix().shape(),
            params.prototypes.shape()
        )));
    }
    let mut g = Graph::new();
    let p = params.map("", &mut bind_const(&mut g));
    let x = g.constant(x_ls.clone());
    let d = g.constant(prior.matrix().clone());
    let (xc, probs) = cross_attention(&mut g, x, d, &p, cfg);
    let per_head: Vec<Tensor<T>> = probs.iter().map(|&v| g.value(v).clone()).collect();
    let refs: Vec<&Tensor<T>> = per_head.iter().collect();
    Ok(CrossAttention {
        assignment: crate::lsra::average(&refs).expect("at least one head"),
        per_head,
        features: g.value(xc).clone(),
    })
}

/// Evaluation-mode refinement of community rows.
pub fn community_refine<T: Scalar>(xc: &Tensor<T>, params: &ClusterParams<Tensor<T>>, cfg: &ClusterConfig) -> Result<Tensor<T>> {
    if xc.cols() != cfg.d_model || xc.rows() == 0 {
        return Err(Error::ShapeMismatch(format!("community features {:?}", xc.shape())));
    }
    let mut g = Graph::new();
    let p = params.map("", &mut bind_const(&mut g));
    let x = g.constant(xc.clone());
    let (out, _) = refine(&mut g, x, &p, cfg, &mut Dropout::off());
    Ok(g.value(out).clone())
}

/// Logits (1 × classes) from the mean community row.
pub fn readout_classify<T: Scalar>(xc: &Tensor<T>, mlp: &MlpParams<Tensor<T>>) -> Result<Tensor<T>> {
    if xc.cols() != mlp.w1.rows() {
        return Err(Error::ShapeMismatch(format!(
            "features {:?} for MLP {:?}",
            xc.shape(),
            mlp.w1.shape()
        )));
    }
    let mut g = Graph::new();
    let p = mlp.map("", &mut bind_const(&mut g));
    let x = g.constant(xc.clone());
    let o = readout(&mut g, x, &p);
    Ok(g.value(o).clone())
}

/// `argmax_k P[i,k]` per row; ties go to the lowest `k`.
pub fn hard_labels<T: Scalar>(p: &Tensor<T>) -> Vec<usize> {
    (0..p.rows())
        .map(|i| {
            let row = p.row(i);
            let mut best = 0;
            for (k, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = k;
                }
            }
            best
        })
        .collect()
}

/// `mean(group_a) − mean(group_b)`.
pub fn community_interaction_diff<T: Scalar>(group_a: &[Tensor<T>], group_b: &[Tensor<T>]) -> Result<Tensor<T>> {
    let refs_a: Vec<&Tensor<T>> = group_a.iter().collect();
    let refs_b: Vec<&Tensor<T>> = group_b.iter().collect();
    let (Some(a), Some(b)) = (crate::lsra::average(&refs_a), crate::lsra::average(&refs_b)) else {
        return Err(Error::EmptyGroup);
    };
    if group_a.iter().chain(group_b).any(|m| !m.same_shape(&a)) {
        return Err(Error::ShapeMismatch("interaction matrices differ in shape".into()));
    }
    Ok(a.zip_map(&b, |x, y| x - y))
}
