//! Parameter containers generic over their leaf type.
//!
//! Every container is generic over `P`: `Tensor<T>` for stored weights and
//! [`Var`](crate::autodiff::Var) once bound to a graph. `map` and
//! `visit_mut` walk the leaves in one fixed order, so flattened parameter
//! lists, gradients and checkpoint entries line up by position.

use rand::Rng;

use crate::autodiff::{Graph, Var};
use crate::error::Result;
use crate::init::xavier_uniform_with;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub(crate) fn join(prefix: &str, name: &str) -> String {
    if prefix.is_empty() {
        name.to_string()
    } else {
        format!("{prefix}.{name}")
    }
}

/// Query/key/value/output projections, all `d × d`.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionParams<P> {
    pub wq: P,
    pub wk: P,
    pub wv: P,
    pub wo: P,
}

impl<P> AttentionParams<P> {
    pub fn map<Q>(&self, prefix: &str, f: &mut dyn FnMut(String, &P) -> Q) -> AttentionParams<Q> {
        AttentionParams {
            wq: f(join(prefix, "wq"), &self.wq),
            wk: f(join(prefix, "wk"), &self.wk),
            wv: f(join(prefix, "wv"), &self.wv),
            wo: f(join(prefix, "wo"), &self.wo),
        }
    }

    pub fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(String, &mut P)) {
        f(join(prefix, "wq"), &mut self.wq);
        f(join(prefix, "wk"), &mut self.wk);
        f(join(prefix, "wv"), &mut self.wv);
        f(join(prefix, "wo"), &mut self.wo);
    }
}

impl<T: Scalar> AttentionParams<Tensor<T>> {
    pub fn init<R: Rng>(d: usize, rng: &mut R) -> Result<Self> {
        Ok(Self {
            wq: xavier_uniform_with(&[d, d], rng)?,
            wk: xavier_uniform_with(&[d, d], rng)?,
            wv: xavier_uniform_with(&[d, d], rng)?,
            wo: xavier_uniform_with(&[d, d], rng)?,
        })
    }
}

/// Residual/normalisation wrapping and the position-wise feed-forward net.
#[derive(Debug, Clone, PartialEq)]
pub struct FeedForwardParams<P> {
    pub ln1_gain: P,
    pub ln1_bias: P,
    pub w1: P,
    pub b1: P,
    pub w2: P,
    pub b2: P,
    pub ln2_gain: P,
    pub ln2_bias: P,
}

impl<P> FeedForwardParams<P> {
    pub fn map<Q>(&self, prefix: &str, f: &mut dyn FnMut(String, &P) -> Q) -> FeedForwardParams<Q> {
        FeedForwardParams {
            ln1_gain: f(join(prefix, "ln1_gain"), &self.ln1_gain),
            ln1_bias: f(join(prefix, "ln1_bias"), &self.ln1_bias),
            w1: f(join(prefix, "w1"), &self.w1),
            b1: f(join(prefix, "b1"), &self.b1),
            w2: f(join(prefix, "w2"), &self.w2),
            b2: f(join(prefix, "b2"), &self.b2),
            ln2_gain: f(join(prefix, "ln2_gain"), &self.ln2_gain),
            ln2_bias: f(join(prefix, "ln2_bias"), &self.ln2_bias),
        }
    }

    pub fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(String, &mut P)) {
        f(join(prefix, "ln1_gain"), &mut self.ln1_gain);
        f(join(prefix, "ln1_bias"), &mut self.ln1_bias);
        f(join(prefix, "w1"), &mut self.w1);
        f(join(prefix, "b1"), &mut self.b1);
        f(join(prefix, "w2"), &mut self.w2);
        f(join(prefix, "b2"), &mut self.b2);
        f(join(prefix, "ln2_gain"), &mut self.ln2_gain);
        f(join(prefix, "ln2_bias"), &mut self.ln2_bias);
    }
}

impl<T: Scalar> FeedForwardParams<Tensor<T>> {
    pub fn init<R: Rng>(d: usize, hidden: usize, rng: &mut R) -> Result<Self> {
        Ok(Self {
            ln1_gain: Tensor::full(&[1, d], T::one()),
            ln1_bias: Tensor::zeros(&[1, d]),
            w1: xavier_uniform_with(&[d, hidden], rng)?,
            b1: Tensor::zeros(&[1, hidden]),
            w2: xavier_uniform_with(&[hidden, d], rng)?,
            b2: Tensor::zeros(&[1, d]),
            ln2_gain: Tensor::full(&[1, d], T::one()),
            ln2_bias: Tensor::zeros(&[1, d]),
        })
    }
}

/// Learnable hop threshold and raw decay of one short-range head (both 1×1).
#[derive(Debug, Clone, PartialEq)]
pub struct ShortHeadParams<P> {
    pub hop: P,
    pub gamma_raw: P,
}

impl<P> ShortHeadParams<P> {
    pub fn map<Q>(&self, prefix: &str, f: &mut dyn FnMut(String, &P) -> Q) -> ShortHeadParams<Q> {
        ShortHeadParams {
            hop: f(join(prefix, "hop"), &self.hop),
            gamma_raw: f(join(prefix, "gamma_raw"), &self.gamma_raw),
        }
    }

    pub fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(String, &mut P)) {
        f(join(prefix, "hop"), &mut self.hop);
        f(join(prefix, "gamma_raw"), &mut self.gamma_raw);
    }
}

impl<T: Scalar> ShortHeadParams<Tensor<T>> {
    pub fn new(hop: T, gamma_raw: T) -> Self {
        Self {
            hop: Tensor::scalar(hop),
            gamma_raw: Tensor::scalar(gamma_raw),
        }
    }
}

/// One LSRA encoder layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LsraLayerParams<P> {
    pub attn: AttentionParams<P>,
    /// Empty when every head is a long-range head.
    pub short: Vec<ShortHeadParams<P>>,
    pub ffn: FeedForwardParams<P>,
}

impl<P> LsraLayerParams<P> {
    pub fn map<Q>(&self, prefix: &str, f: &mut dyn FnMut(String, &P) -> Q) -> LsraLayerParams<Q> {
        LsraLayerParams {
            attn: self.attn.map(&join(prefix, "attn"), f),
            short: self
                .short
                .iter()
                .enumerate()
                .map(|(h, s)| s.map(&join(prefix, &format!("short{h}")), f))
                .collect(),
            ffn: self.ffn.map(&join(prefix, "ffn"), f),
        }
    }

    pub fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(String, &mut P)) {
        self.attn.visit_mut(&join(prefix, "attn"), f);
        for (h, s) in self.short.iter_mut().enumerate() {
            s.visit_mut(&join(prefix, &format!("short{h}")), f);
        }
        self.ffn.visit_mut(&join(prefix, "ffn"), f);
    }
}

/// Prototype cross-attention plus the community refinement block.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterParams<P> {
    /// `K × d` community prototypes.
    pub prototypes: P,
    pub wq: P,
    pub wk: P,
    pub wv: P,
    pub refine_attn: AttentionParams<P>,
    pub refine_ffn: FeedForwardParams<P>,
}

impl<P> ClusterParams<P> {
    pub fn map<Q>(&self, prefix: &str, f: &mut dyn FnMut(String, &P) -> Q) -> ClusterParams<Q> {
        ClusterParams {
            prototypes: f(join(prefix, "prototypes"), &self.prototypes),
            wq: f(join(prefix, "wq"), &self.wq),
            wk: f(join(prefix, "wk"), &self.wk),
            wv: f(join(prefix, "wv"), &self.wv),
            refine_attn: self.refine_attn.map(&join(prefix, "refine_attn"), f),
            refine_ffn: self.refine_ffn.map(&join(prefix, "refine_ffn"), f),
        }
    }

    pub fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(String, &mut P)) {
        f(join(prefix, "prototypes"), &mut self.prototypes);
        f(join(prefix, "wq"), &mut self.wq);
        f(join(prefix, "wk"), &mut self.wk);
        f(join(prefix, "wv"), &mut self.wv);
        self.refine_attn.visit_mut(&join(prefix, "refine_attn"), f);
        self.refine_ffn.visit_mut(&join(prefix, "refine_ffn"), f);
    }
}

/// Two-layer classification head `d → hidden → classes`.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams<P> {
    pub w1: P,
    pub b1: P,
    pub w2: P,
    pub b2: P,
}

impl<P> MlpParams<P> {
    pub fn map<Q>(&self, prefix: &str, f: &mut dyn FnMut(String, &P) -> Q) -> MlpParams<Q> {
        MlpParams {
            w1: f(join(prefix, "w1"), &self.w1),
            b1: f(join(prefix, "b1"), &self.b1),
            w2: f(join(prefix, "w2"), &self.w2),
            b2: f(join(prefix, "b2"), &self.b2),
        }
    }

    pub fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(String, &mut P)) {
        f(join(prefix, "w1"), &mut self.w1);
        f(join(prefix, "b1"), &mut self.b1);
        f(join(prefix, "w2"), &mut self.w2);
        f(join(prefix, "b2"), &mut self.b2);
    }
}

impl<T: Scalar> MlpParams<Tensor<T>> {
    pub fn init<R: Rng>(d: usize, hidden: usize, classes: usize, rng: &mut R) -> Result<Self> {
        Ok(Self {
            w1: xavier_uniform_with(&[d, hidden], rng)?,
            b1: Tensor::zeros(&[1, hidden]),
            w2: xavier_uniform_with(&[hidden, classes], rng)?,
            b2: Tensor::zeros(&[1, classes]),
        })
    }
}

/// Binds every tensor of a container as a differentiable graph input.
pub(crate) fn bind<T: Scalar>(g: &mut Graph<T>) -> impl FnMut(String, &Tensor<T>) -> Var + '_ {
    move |_, t| g.param(t.clone())
}

/// Binds every tensor as a constant (no gradient bookkeeping).
pub(crate) fn bind_const<T: Scalar>(g: &mut Graph<T>) -> impl FnMut(String, &Tensor<T>) -> Var + '_ {
    move |_, t| g.constant(t.clone())
}
