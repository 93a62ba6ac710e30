//! Long-short range attention (LSRA) encoder.
//!
//! Half of the heads see energies scaled by a topological decay
//! `σ(γ)^ReLU(S_ij − hop)` computed from the hop-distance matrix `S`; the
//! other half run plain scaled dot-product attention. Head outputs are
//! concatenated (short heads first) and projected by `W_O`, then wrapped in
//! residual + layer norm + feed-forward + residual + layer norm.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Graph, Var};
use crate::error::{Error, Result};
use crate::params::{bind_const, AttentionParams, FeedForwardParams, LsraLayerParams, ShortHeadParams};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// How the decay enters the short-range energies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskMode {
    /// `ê = e · σ(γ)^ReLU(S − hop)`.
    #[default]
    Multiplicative,
    /// `ê = e + ReLU(S − hop) · ln σ(γ)`, a log-space mask on the logits.
    AdditiveLog,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LsraConfig {
    pub d_model: usize,
    pub heads: usize,
    /// Number of decayed heads; `heads / 2` normally, `0` for plain attention.
    pub short_heads: usize,
    pub layers: usize,
    pub ffn_hidden: usize,
    pub dropout: f64,
    pub mask_mode: MaskMode,
    pub ln_eps: f64,
}

impl LsraConfig {
    pub fn d_head(&self) -> usize {
        self.d_model / self.heads
    }

    pub fn long_heads(&self) -> usize {
        self.heads - self.short_heads
    }

    pub fn validate(&self) -> Result<()> {
        if self.heads == 0 || self.d_model % self.heads != 0 {
            return Err(Error::BadConfig(format!(
                "d_model {} must be divisible by heads {}",
                self.d_model, self.heads
            )));
        }
        if self.short_heads > self.heads {
            return Err(Error::BadConfig("more short heads than heads".into()));
        }
        if self.short_heads != 0 && self.heads % 2 != 0 {
            return Err(Error::BadConfig(format!("head count {} must be even", self.heads)));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::BadConfig(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        Ok(())
    }
}

/// Inverted dropout; inactive without an RNG or at rate zero.
pub(crate) struct Dropout<'a> {
    pub rate: f64,
    pub rng: Option<&'a mut ChaCha8Rng>,
}

impl Dropout<'_> {
    pub fn off() -> Dropout<'static> {
        Dropout { rate: 0.0, rng: None }
    }

    pub fn apply<T: Scalar>(&mut self, g: &mut Graph<T>, x: Var) -> Var {
        match self.rng.as_deref_mut() {
            Some(rng) if self.rate > 0.0 => {
                let keep: Vec<bool> = (0..g.value(x).len()).map(|_| rng.random::<f64>() >= self.rate).collect();
                g.dropout(x, &keep, T::of(self.rate))
            }
            _ => x,
        }
    }
}

/// Decay multiplier on the graph; returns `(ReLU(S − hop), mask)`.
pub(crate) fn decay_exponent<T: Scalar>(g: &mut Graph<T>, spl: Var, hop: Var) -> Var {
    let neg_hop = g.scale(hop, -T::one());
    let shifted = g.add_scalar(spl, neg_hop);
    g.relu(shifted)
}

pub(crate) fn decay_mask<T: Scalar>(g: &mut Graph<T>, spl: Var, p: &ShortHeadParams<Var>) -> Var {
    let exponent = decay_exponent(g, spl, p.hop);
    let base = g.sigmoid(p.gamma_raw);
    g.pow_scalar_base(base, exponent)
}

/// Attention weights of one head, `softmax_j(ê_ij)`.
pub(crate) fn head_probs<T: Scalar>(
    g: &mut Graph<T>,
    q: Var,
    k: Var,
    d_head: usize,
    short: Option<(Var, &ShortHeadParams<Var>, MaskMode)>,
) -> Var {
    let raw = g.matmul_t(q, k);
    let mut e = g.scale(raw, T::one() / T::of_usize(d_head).sqrt());
    if let Some((spl, p, mode)) = short {
        e = match mode {
            MaskMode::Multiplicative => {
                let m = decay_mask(g, spl, p);
                g.mul(e, m)
            }
            MaskMode::AdditiveLog => {
                let exponent = decay_exponent(g, spl, p.hop);
                let base = g.sigmoid(p.gamma_raw);
                let log_base = g.ln(base);
                let bias = g.mul_scalar(exponent, log_base);
                g.add(e, bias)
            }
        };
    }
    g.softmax_rows(e)
}

/// Multi-head attention of `x_q` over `x_kv`. The first `short.len()` heads
/// are decayed by `spl`. Returns the projected output and per-head weights.
pub(crate) fn multi_head_attention<T: Scalar>(
    g: &mut Graph<T>,
    x_q: Var,
    x_kv: Var,
    p: &AttentionParams<Var>,
    heads: usize,
    short: &[ShortHeadParams<Var>],
    spl: Option<Var>,
    mode: MaskMode,
) -> (Var, Vec<Var>) {
    let d = g.value(p.wq).cols();
    let dh = d / heads;
    let q = g.matmul(x_q, p.wq);
    let k = g.matmul(x_kv, p.wk);
    let v = g.matmul(x_kv, p.wv);
    let mut outs = Vec::with_capacity(heads);
    let mut probs = Vec::with_capacity(heads);
    for h in 0..heads {
        let (lo, hi) = (h * dh, (h + 1) * dh);
        let qh = g.slice_cols(q, lo, hi);
        let kh = g.slice_cols(k, lo, hi);
        let vh = g.slice_cols(v, lo, hi);
        let mask = match (short.get(h), spl) {
            (Some(sp), Some(s)) => Some((s, sp, mode)),
            _ => None,
        };
        let a = head_probs(g, qh, kh, dh, mask);
        probs.push(a);
        outs.push(g.matmul(a, vh));
    }
    let cat = if outs.len() == 1 { outs[0] } else { g.concat_cols(&outs) };
    (g.matmul(cat, p.wo), probs)
}

/// `LN₂(h + FFN(h))` with `h = LN₁(x + attn)`.
pub(crate) fn block_tail<T: Scalar>(
    g: &mut Graph<T>,
    x: Var,
    attn: Var,
    p: &FeedForwardParams<Var>,
    eps: T,
    drop_attn: bool,
    dropout: &mut Dropout<'_>,
) -> Var {
    let attn = if drop_attn { dropout.apply(g, attn) } else { attn };
    let res1 = g.add(x, attn);
    let h = g.layer_norm(res1, p.ln1_gain, p.ln1_bias, eps);
    let a = g.matmul(h, p.w1);
    let a = g.add_row(a, p.b1);
    let a = g.relu(a);
    let f = g.matmul(a, p.w2);
    let f = g.add_row(f, p.b2);
    let f = dropout.apply(g, f);
    let res2 = g.add(h, f);
    g.layer_norm(res2, p.ln2_gain, p.ln2_bias, eps)
}

/// One LSRA layer; also returns the attention weights of each head.
pub(crate) fn lsra_layer<T: Scalar>(
    g: &mut Graph<T>,
    x: Var,
    spl: Var,
    p: &LsraLayerParams<Var>,
    cfg: &LsraConfig,
    dropout: &mut Dropout<'_>,
) -> (Var, Vec<Var>) {
    let (attn, probs) = multi_head_attention(g, x, x, &p.attn, cfg.heads, &p.short, Some(spl), cfg.mask_mode);
    let out = block_tail(g, x, attn, &p.ffn, T::of(cfg.ln_eps), true, dropout);
    (out, probs)
}

pub fn init_lsra_layer<T: Scalar, R: Rng>(cfg: &LsraConfig, hop: T, gamma_raw: T, rng: &mut R) -> Result<LsraLayerParams<Tensor<T>>> {
    Ok(LsraLayerParams {
        attn: AttentionParams::init(cfg.d_model, rng)?,
        short: (0..cfg.short_heads).map(|_| ShortHeadParams::new(hop, gamma_raw)).collect(),
        ffn: FeedForwardParams::init(cfg.d_model, cfg.ffn_hidden, rng)?,
    })
}

/// `M_ij = σ(γ)^ReLU(S_ij − hop)`.
pub fn decay_multiplier<T: Scalar>(spl: &Tensor<T>, hop: T, gamma_raw: T) -> Tensor<T> {
    let mut g = Graph::new();
    let s = g.constant(spl.clone());
    let p = ShortHeadParams {
        hop: g.constant(Tensor::scalar(hop)),
        gamma_raw: g.constant(Tensor::scalar(gamma_raw)),
    };
    let m = decay_mask(&mut g, s, &p);
    g.value(m).clone()
}

fn single_head<T: Scalar>(q: &Tensor<T>, k: &Tensor<T>, v: &Tensor<T>, short: Option<(&Tensor<T>, T, T, MaskMode)>) -> Tensor<T> {
    let mut g = Graph::new();
    let (qv, kv, vv) = (g.constant(q.clone()), g.constant(k.clone()), g.constant(v.clone()));
    let d_head = q.cols();
    let a = match short {
        Some((spl, hop, gamma, mode)) => {
            let s = g.constant(spl.clone());
            let p = ShortHeadParams {
                hop: g.constant(Tensor::scalar(hop)),
                gamma_raw: g.constant(Tensor::scalar(gamma)),
            };
            head_probs(&mut g, qv, kv, d_head, Some((s, &p, mode)))
        }
        None => head_probs(&mut g, qv, kv, d_head, None),
    };
    let o = g.matmul(a, vv);
    g.value(o).clone()
}

/// One decayed head: `softmax_j((q_i·k_j/√d_head) · M_ij) · V`.
pub fn short_range_head<T: Scalar>(q: &Tensor<T>, k: &Tensor<T>, v: &Tensor<T>, spl: &Tensor<T>, hop: T, gamma_raw: T) -> Tensor<T> {
    single_head(q, k, v, Some((spl, hop, gamma_raw, MaskMode::Multiplicative)))
}

/// [`short_range_head`] with an explicit way of applying the mask.
pub fn short_range_head_with<T: Scalar>(
    q: &Tensor<T>,
    k: &Tensor<T>,
    v: &Tensor<T>,
    spl: &Tensor<T>,
    hop: T,
    gamma_raw: T,
    mode: MaskMode,
) -> Tensor<T> {
    single_head(q, k, v, Some((spl, hop, gamma_raw, mode)))
}

/// One plain head: `softmax_j(q_i·k_j/√d_head) · V`.
pub fn long_range_head<T: Scalar>(q: &Tensor<T>, k: &Tensor<T>, v: &Tensor<T>) -> Tensor<T> {
    single_head(q, k, v, None)
}

fn check_inputs<T: Scalar>(x: &Tensor<T>, spl: &Tensor<T>, cfg: &LsraConfig) -> Result<()> {
    cfg.validate()?;
    if x.cols() != cfg.d_model || spl.rows() != x.rows() || spl.cols() != x.rows() {
        return Err(Error::ShapeMismatch(format!(
            "features {:?} and SPL {:?} for width {}",
            x.shape(),
            spl.shape(),
            cfg.d_model
        )));
    }
    Ok(())
}

/// Evaluation-mode encoder pass over node features `x` (N × d).
pub fn lsra_forward<T: Scalar>(
    x: &Tensor<T>,
    spl: &Tensor<T>,
    layers: &[LsraLayerParams<Tensor<T>>],
    cfg: &LsraConfig,
) -> Result<Tensor<T>> {
    check_inputs(x, spl, cfg)?;
    let mut g = Graph::new();
    let s = g.constant(spl.clone());
    let mut h = g.constant(x.clone());
    for layer in layers {
        let p = layer.map("", &mut bind_const(&mut g));
        h = lsra_layer(&mut g, h, s, &p, cfg, &mut Dropout::off()).0;
    }
    Ok(g.value(h).clone())
}

/// Head-averaged attention weights of one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionExport<T> {
    /// Mean over the short-range heads; `None` without short heads.
    pub short: Option<Tensor<T>>,
    /// Mean over the long-range heads; `None` when every head is short.
    pub long: Option<Tensor<T>>,
}

pub(crate) fn average<T: Scalar>(mats: &[&Tensor<T>]) -> Option<Tensor<T>> {
    let first = mats.first()?;
    let mut acc = Tensor::zeros(first.shape());
    for m in mats {
        acc.add_assign(m);
    }
    Some(acc.scale(T::one() / T::of_usize(mats.len())))
}

pub(crate) fn split_branches<T: Scalar>(probs: &[&Tensor<T>], short_heads: usize) -> AttentionExport<T> {
    AttentionExport {
        short: average(&probs[..short_heads]),
        long: average(&probs[short_heads..]),
    }
}

/// Post-softmax attention of the last encoder layer, averaged per branch.
pub fn export_attention<T: Scalar>(
    x: &Tensor<T>,
    spl: &Tensor<T>,
    layers: &[LsraLayerParams<Tensor<T>>],
    cfg: &LsraConfig,
) -> Result<AttentionExport<T>> {
    check_inputs(x, spl, cfg)?;
    let mut g = Graph::new();
    let s = g.constant(spl.clone());
    let mut h = g.constant(x.clone());
    let mut last = Vec::new();
    for layer in layers {
        let p = layer.map("", &mut bind_const(&mut g));
        let (out, probs) = lsra_layer(&mut g, h, s, &p, cfg, &mut Dropout::off());
        h = out;
        last = probs;
    }
    let mats: Vec<&Tensor<T>> = last.iter().map(|&v| g.value(v)).collect();
    Ok(split_branches(&mats, cfg.short_heads))
}
