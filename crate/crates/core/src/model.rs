//! The full classifier: input projection, LSRA encoder, prior-guided
//! clustering and the MLP head.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Graph, Var};
use crate::clustering::{self, init_cluster_params, AssignmentFn, ClusterConfig, DicePrior};
use crate::error::{Error, Result};
use crate::init::xavier_uniform_with;
use crate::lsra::{self, init_lsra_layer, Dropout, LsraConfig, MaskMode};
use crate::params::{bind, bind_const, join, ClusterParams, LsraLayerParams, MlpParams};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub d_model: usize,
    pub heads: usize,
    pub layers: usize,
    pub ffn_hidden: usize,
    pub dropout: f64,
    pub communities: usize,
    /// Heads of the prototype cross-attention; `1` gives the single-head form.
    pub cluster_heads: usize,
    pub mlp_hidden: usize,
    pub classes: usize,
    pub hop_init: f64,
    pub gamma_init: f64,
    pub mask_mode: MaskMode,
    pub ln_eps: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            d_model: 256,
            heads: 8,
            layers: 1,
            ffn_hidden: 1024,
            dropout: 0.1,
            communities: 8,
            cluster_heads: 8,
            mlp_hidden: 32,
            classes: 2,
            hop_init: 2.0,
            gamma_init: 0.0,
            mask_mode: MaskMode::Multiplicative,
            ln_eps: 1e-5,
        }
    }
}

/// Model variants used for ablations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    #[default]
    Full,
    /// Every encoder head attends globally.
    NoLsra,
    /// The Dice prior is replaced by all ones.
    NoPrior,
    /// Softmax instead of entmax for the assignment.
    NoEntmax,
    /// Encoded nodes are mean-pooled straight into the MLP.
    NoClustering,
}

impl Variant {
    pub const ALL: [Variant; 5] = [
        Variant::Full,
        Variant::NoLsra,
        Variant::NoPrior,
        Variant::NoEntmax,
        Variant::NoClustering,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::NoLsra => "no_lsra",
            Variant::NoPrior => "no_prior",
            Variant::NoEntmax => "no_entmax",
            Variant::NoClustering => "no_clustering",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::BadConfig(format!("unknown variant {s:?}")))
    }
}

impl ModelConfig {
    pub fn lsra(&self, variant: Variant) -> LsraConfig {
        LsraConfig {
            d_model: self.d_model,
            heads: self.heads,
            short_heads: if variant == Variant::NoLsra { 0 } else { self.heads / 2 },
            layers: self.layers,
            ffn_hidden: self.ffn_hidden,
            dropout: self.dropout,
            mask_mode: self.mask_mode,
            ln_eps: self.ln_eps,
        }
    }

    pub fn cluster(&self, variant: Variant) -> ClusterConfig {
        ClusterConfig {
            d_model: self.d_model,
            communities: self.communities,
            heads: self.cluster_heads,
            refine_heads: self.heads,
            ffn_hidden: self.ffn_hidden,
            dropout: self.dropout,
            assignment: if variant == Variant::NoEntmax {
                AssignmentFn::Softmax
            } else {
                AssignmentFn::Entmax15
            },
            ln_eps: self.ln_eps,
        }
    }

    pub fn validate(&self, variant: Variant) -> Result<()> {
        self.lsra(variant).validate()?;
        if variant != Variant::NoClustering {
            self.cluster(variant).validate()?;
        }
        if self.classes < 2 || self.mlp_hidden == 0 || self.layers == 0 {
            return Err(Error::BadConfig("classes ≥ 2, mlp_hidden ≥ 1 and layers ≥ 1 required".into()));
        }
        Ok(())
    }
}

/// Every learnable tensor of the model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<P> {
    /// `N × d` projection of correlation rows.
    pub input_w: P,
    pub input_b: P,
    pub layers: Vec<LsraLayerParams<P>>,
    /// Absent in the no-clustering variant.
    pub cluster: Option<ClusterParams<P>>,
    pub mlp: MlpParams<P>,
}

impl<P> ModelParams<P> {
    pub fn map<Q>(&self, f: &mut dyn FnMut(String, &P) -> Q) -> ModelParams<Q> {
        ModelParams {
            input_w: f("input.w".into(), &self.input_w),
            input_b: f("input.b".into(), &self.input_b),
            layers: self
                .layers
                .iter()
                .enumerate()
                .map(|(l, p)| p.map(&join("lsra", &l.to_string()), f))
                .collect(),
            cluster: self.cluster.as_ref().map(|c| c.map("cluster", f)),
            mlp: self.mlp.map("mlp", f),
        }
    }

    pub fn visit_mut(&mut self, f: &mut dyn FnMut(String, &mut P)) {
        f("input.w".into(), &mut self.input_w);
        f("input.b".into(), &mut self.input_b);
        for (l, p) in self.layers.iter_mut().enumerate() {
            p.visit_mut(&join("lsra", &l.to_string()), f);
        }
        if let Some(c) = self.cluster.as_mut() {
            c.visit_mut("cluster", f);
        }
        self.mlp.visit_mut("mlp", f);
    }
}

impl<T: Scalar> ModelParams<Tensor<T>> {
    pub fn init<R: Rng>(cfg: &ModelConfig, variant: Variant, rois: usize, rng: &mut R) -> Result<Self> {
        cfg.validate(variant)?;
        let lsra_cfg = cfg.lsra(variant);
        let input_w = xavier_uniform_with(&[rois, cfg.d_model], rng)?;
        let layers = (0..cfg.layers)
            .map(|_| init_lsra_layer(&lsra_cfg, T::of(cfg.hop_init), T::of(cfg.gamma_init), rng))
            .collect::<Result<Vec<_>>>()?;
        let cluster = match variant {
            Variant::NoClustering => None,
            _ => Some(init_cluster_params(&cfg.cluster(variant), rng)?),
        };
        Ok(Self {
            input_w,
            input_b: Tensor::zeros(&[1, cfg.d_model]),
            layers,
            cluster,
            mlp: MlpParams::init(cfg.d_model, cfg.mlp_hidden, cfg.classes, rng)?,
        })
    }

    /// Leaves in canonical order with dotted names.
    pub fn named(&self) -> Vec<(String, Tensor<T>)> {
        let mut out = Vec::new();
        self.map(&mut |name, t| out.push((name, t.clone())));
        out
    }

    pub fn names(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.map(&mut |name, _| out.push(name));
        out
    }

    pub fn flatten(&self) -> Vec<Tensor<T>> {
        let mut out = Vec::new();
        self.map(&mut |_, t| out.push(t.clone()));
        out
    }

    /// Overwrites the leaves in canonical order.
    pub fn assign(&mut self, values: &[Tensor<T>]) -> Result<()> {
        let mut count = 0;
        let mut bad = None;
        self.visit_mut(&mut |name, t| {
            match values.get(count) {
                Some(v) if v.same_shape(t) => *t = v.clone(),
                _ => {
                    bad.get_or_insert(name);
                }
            }
            count += 1;
        });
        match bad {
            Some(name) => Err(Error::ShapeMismatch(format!("parameter {name}"))),
            None if count != values.len() => Err(Error::ShapeMismatch(format!("{} values for {count} parameters", values.len()))),
            None => Ok(()),
        }
    }

    pub fn scalar_count(&self) -> usize {
        let mut n = 0;
        self.map(&mut |_, t| n += t.len());
        n
    }
}

/// One subject's model input.
#[derive(Debug, Clone, PartialEq)]
pub struct Subject<T> {
    /// `N × N` correlation rows used as node features.
    pub features: Tensor<T>,
    /// `N × N` hop distances on the sparsified graph.
    pub spl: Tensor<T>,
}

/// Values produced by one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace<T> {
    /// `1 × classes`.
    pub logits: Tensor<T>,
    /// Per encoder layer, per head attention weights (short heads first).
    pub attention: Vec<Vec<Tensor<T>>>,
    /// Head-averaged assignment, `N × K`.
    pub assignment: Option<Tensor<T>>,
    /// Head-averaged community self-attention, `K × K`.
    pub community_attention: Option<Tensor<T>>,
}

impl<T: Scalar> ForwardTrace<T> {
    /// Softmax probability of class 1.
    pub fn score(&self) -> T {
        crate::entmax::softmax(self.logits.data())[1]
    }

    pub fn predicted(&self) -> usize {
        clustering::hard_labels(&self.logits)[0]
    }
}

struct Built {
    logits: Var,
    attention: Vec<Vec<Var>>,
    assignment: Vec<Var>,
    community: Vec<Var>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BrainHgt<T> {
    pub config: ModelConfig,
    pub variant: Variant,
    pub params: ModelParams<Tensor<T>>,
    /// `N × K` prior used by the clustering stage.
    pub prior: DicePrior<T>,
}

impl<T: Scalar> BrainHgt<T> {
    pub fn new(config: ModelConfig, variant: Variant, prior: DicePrior<T>, seed: u64) -> Result<Self> {
        use rand::SeedableRng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = ModelParams::init(&config, variant, prior.rois(), &mut rng)?;
        Self::from_params(config, variant, prior, params)
    }

    pub fn from_params(config: ModelConfig, variant: Variant, prior: DicePrior<T>, params: ModelParams<Tensor<T>>) -> Result<Self> {
        config.validate(variant)?;
        if variant != Variant::NoClustering && prior.communities() != config.communities {
            return Err(Error::ShapeMismatch(format!(
                "prior has {} communities, config {}",
                prior.communities(),
                config.communities
            )));
        }
        if params.cluster.is_some() == (variant == Variant::NoClustering) {
            return Err(Error::ShapeMismatch("cluster parameters do not match the variant".into()));
        }
        if params.input_w.rows() != prior.rois() {
            return Err(Error::ShapeMismatch(format!(
                "input projection for {} ROIs, prior for {}",
                params.input_w.rows(),
                prior.rois()
            )));
        }
        Ok(Self {
            config,
            variant,
            params,
            prior,
        })
    }

    pub fn rois(&self) -> usize {
        self.params.input_w.rows()
    }

    fn check(&self, s: &Subject<T>) -> Result<()> {
        let n = self.rois();
        if s.features.shape() != [n, n] || s.spl.shape() != [n, n] {
            return Err(Error::ShapeMismatch(format!(
                "subject features {:?}, SPL {:?} for {n} ROIs",
                s.features.shape(),
                s.spl.shape()
            )));
        }
        Ok(())
    }

    fn prior_tensor(&self) -> Tensor<T> {
        match self.variant {
            Variant::NoPrior => Tensor::full(self.prior.matrix().shape(), T::one()),
            _ => self.prior.matrix().clone(),
        }
    }

    fn build(&self, g: &mut Graph<T>, p: &ModelParams<Var>, s: &Subject<T>, dropout: &mut Dropout<'_>) -> Built {
        let lsra_cfg = self.config.lsra(self.variant);
        let r = g.constant(s.features.clone());
        let spl = g.constant(s.spl.clone());
        let x = g.matmul(r, p.input_w);
        let mut x = g.add_row(x, p.input_b);
        let mut attention = Vec::with_capacity(p.layers.len());
        for layer in &p.layers {
            let (out, probs) = lsra::lsra_layer(g, x, spl, layer, &lsra_cfg, dropout);
            x = out;
            attention.push(probs);
        }
        let (pooled, assignment, community) = match &p.cluster {
            Some(cp) => {
                let cfg = self.config.cluster(self.variant);
                let prior = g.constant(self.prior_tensor());
                let (xc, assign) = clustering::cross_attention(g, x, prior, cp, &cfg);
                let (refined, comm) = clustering::refine(g, xc, cp, &cfg, dropout);
                (refined, assign, comm)
            }
            None => (x, Vec::new(), Vec::new()),
        };
        let logits = clustering::readout(g, pooled, &p.mlp);
        Built {
            logits,
            attention,
            assignment,
            community,
        }
    }

    /// Evaluation-mode forward pass (no dropout).
    pub fn forward(&self, s: &Subject<T>) -> Result<ForwardTrace<T>> {
        self.check(s)?;
        let mut g = Graph::new();
        let p = self.params.map(&mut bind_const(&mut g));
        let b = self.build(&mut g, &p, s, &mut Dropout::off());
        let avg = |vars: &[Var]| {
            let mats: Vec<&Tensor<T>> = vars.iter().map(|&v| g.value(v)).collect();
            lsra::average(&mats)
        };
        Ok(ForwardTrace {
            logits: g.value(b.logits).clone(),
            attention: b
                .attention
                .iter()
                .map(|l| l.iter().map(|&v| g.value(v).clone()).collect())
                .collect(),
            assignment: avg(&b.assignment),
            community_attention: avg(&b.community),
        })
    }

    /// Cross-entropy of one subject and the gradient of every parameter in
    /// canonical order. Dropout is active when `rng` is given.
    pub fn loss_and_grads(&self, s: &Subject<T>, label: usize, rng: Option<&mut ChaCha8Rng>) -> Result<(T, Vec<Tensor<T>>)> {
        self.check(s)?;
        if label >= self.config.classes {
            return Err(Error::BadConfig(format!("label {label} out of range")));
        }
        let mut g = Graph::new();
        let mut leaves = Vec::new();
        let p = {
            let mut binder = bind(&mut g);
            self.params.map(&mut |name, t| {
                let v = binder(name, t);
                leaves.push(v);
                v
            })
        };
        let mut dropout = Dropout {
            rate: self.config.dropout,
            rng,
        };
        let b = self.build(&mut g, &p, s, &mut dropout);
        let loss = g.cross_entropy(b.logits, &[label]);
        let value = g.scalar(loss);
        let shapes: Vec<Vec<usize>> = leaves.iter().map(|&v| g.value(v).shape().to_vec()).collect();
        let mut grads = g.backward(loss)?;
        let out = leaves
            .iter()
            .zip(shapes)
            .map(|(&v, shape)| grads.take(v).unwrap_or_else(|| Tensor::zeros(&shape)))
            .collect();
        Ok((value, out))
    }

    /// Loss only, evaluation mode; used by finite-difference checks.
    pub fn loss(&self, s: &Subject<T>, label: usize) -> Result<T> {
        let logits = self.forward(s)?.logits;
        Ok(-crate::entmax::log_softmax(logits.data())[label])
    }
}
