mod oracles;

use brainhgt::autodiff::{Graph, Var};
use brainhgt::entmax::{entmax15, softmax};
use brainhgt::gradcheck::{finite_diff_grad, relative_error};
use brainhgt::init::{gram_schmidt, xavier_uniform_init};
use brainhgt::optim::{adam_step, AdamConfig, AdamState};
use brainhgt::Tensor;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn support(p: &[f64]) -> Vec<bool> {
    p.iter().map(|&v| v > 0.0).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn entmax_on_simplex_and_matches_bisection(z in prop::collection::vec(-6.0..6.0f64, 1..40)) {
        let p = entmax15(&z);
        prop_assert!(p.iter().all(|&v| v >= 0.0));
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for (a, b) in p.iter().zip(oracles::entmax15_bisect(&z)) {
            prop_assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn shift_invariance(z in prop::collection::vec(-6.0..6.0f64, 1..40), c in -50.0..50.0f64) {
        let shifted: Vec<f64> = z.iter().map(|v| v + c).collect();
        for (f, name) in [(entmax15::<f64> as fn(&[f64]) -> Vec<f64>, "entmax"), (softmax::<f64>, "softmax")] {
            for (a, b) in f(&z).iter().zip(f(&shifted)) {
                prop_assert!((a - b).abs() < 1e-12, "{} moved by {}", name, (a - b).abs());
            }
        }
    }

    #[test]
    fn scaling_never_grows_support(z in prop::collection::vec(-6.0..6.0f64, 2..40), c in 1.0001..20.0f64) {
        let base = support(&entmax15(&z));
        let scaled: Vec<f64> = z.iter().map(|v| v * c).collect();
        for (before, after) in base.iter().zip(support(&entmax15(&scaled))) {
            prop_assert!(*before || !after);
        }
    }

    #[test]
    fn gram_schmidt_orthonormal(seed in 0u64..1000, k in 1usize..6, extra in 0usize..6) {
        let c: Tensor<f64> = xavier_uniform_init(&[k, k + extra], seed).unwrap();
        let q = gram_schmidt(&c).unwrap();
        let gram = q.matmul_t(&q);
        for i in 0..k {
            for j in 0..k {
                let target = if i == j { 1.0 } else { 0.0 };
                prop_assert!((gram.at(i, j) - target).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn adam_is_deterministic(seed in 0u64..1000) {
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut p = vec![Tensor::matrix(2, 3, (0..6).map(|_| rng.random_range(-1.0..1.0)).collect())];
            let mut st = AdamState::new(AdamConfig::default(), p.iter());
            for _ in 0..5 {
                let g = vec![p[0].map(|v| 2.0 * v + 0.1)];
                adam_step(&mut p, &g, &mut st).unwrap();
            }
            p
        };
        prop_assert_eq!(run(), run());
    }
}

/// Builds `op` on graph inputs and returns a random linear functional of
/// its output, so every output entry gets a distinct upstream gradient.
fn check_primitive(name: &str, inputs: &[Tensor<f64>], seed: u64, op: &dyn Fn(&mut Graph<f64>, &[Var]) -> Var) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xface);
    let out_shape = {
        let mut g = Graph::new();
        let vars: Vec<Var> = inputs.iter().map(|t| g.constant(t.clone())).collect();
        let o = op(&mut g, &vars);
        g.value(o).shape().to_vec()
    };
    let w = Tensor::new(
        out_shape.clone(),
        (0..out_shape.iter().product()).map(|_| rng.random_range(-1.0..1.0)).collect(),
    )
    .unwrap();
    let eval = |xs: &[Tensor<f64>], grad: bool| {
        let mut g = Graph::new();
        let vars: Vec<Var> = xs
            .iter()
            .map(|t| if grad { g.param(t.clone()) } else { g.constant(t.clone()) })
            .collect();
        let o = op(&mut g, &vars);
        let weighted = g.mul_const(o, w.clone());
        let loss = g.sum(weighted);
        (g, vars, loss)
    };
    let (g, vars, loss) = eval(inputs, true);
    let mut grads = g.backward(loss).unwrap();
    for (idx, x) in inputs.iter().enumerate() {
        let analytic = grads.take(vars[idx]).unwrap_or_else(|| Tensor::zeros(x.shape()));
        let numeric = finite_diff_grad(
            |probe| {
                let mut xs = inputs.to_vec();
                xs[idx] = probe.clone();
                let (g, _, loss) = eval(&xs, false);
                g.scalar(loss)
            },
            x,
            1e-5,
        );
        let err = relative_error(&analytic, &numeric, 1e-6);
        assert!(err < 1e-6, "{name}: input {idx} relative error {err:e}");
    }
}

fn rand_t(rng: &mut ChaCha8Rng, r: usize, c: usize, lo: f64, hi: f64) -> Tensor<f64> {
    Tensor::matrix(r, c, (0..r * c).map(|_| rng.random_range(lo..hi)).collect())
}

/// Random values kept at least `gap` away from zero, for ReLU.
fn away_from_zero(rng: &mut ChaCha8Rng, r: usize, c: usize, gap: f64) -> Tensor<f64> {
    Tensor::matrix(
        r,
        c,
        (0..r * c)
            .map(|_| {
                let v: f64 = rng.random_range(gap..2.0);
                if rng.random::<bool>() {
                    v
                } else {
                    -v
                }
            })
            .collect(),
    )
}

/// Logit rows whose entmax thresholds sit clear of every entry, so the
/// finite-difference step never crosses a support boundary.
fn entmax_safe(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Tensor<f64> {
    loop {
        let t = rand_t(rng, r, c, -2.0, 2.0);
        let ok = (0..r).all(|i| {
            let row = t.row(i);
            let p = entmax15(row);
            // p_j = (z_j/2 − τ)², so √p_j recovers z_j/2 − τ on the support.
            let tau = p.iter().zip(row).find(|(p, _)| **p > 0.0).map(|(p, z)| z / 2.0 - p.sqrt()).unwrap();
            row.iter().all(|z| (z / 2.0 - tau).abs() > 1e-3)
        });
        if ok {
            return t;
        }
    }
}

#[test]
fn every_primitive_matches_finite_differences() {
    for seed in 0..8u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = rand_t(&mut rng, 3, 4, -1.0, 1.0);
        let b = rand_t(&mut rng, 3, 4, -1.0, 1.0);
        let m = rand_t(&mut rng, 4, 5, -1.0, 1.0);
        let row = rand_t(&mut rng, 1, 4, -1.0, 1.0);
        let s = rand_t(&mut rng, 1, 1, -1.0, 1.0);
        let pos = rand_t(&mut rng, 3, 4, 0.2, 3.0);
        let c = rand_t(&mut rng, 3, 4, -2.0, 2.0);
        let base = rand_t(&mut rng, 1, 1, 0.2, 0.9);
        let expo = rand_t(&mut rng, 3, 4, 0.1, 3.0);
        let keep: Vec<bool> = (0..12).map(|_| rng.random_bool(0.7)).collect();
        let cases: Vec<(&str, Vec<Tensor<f64>>, Box<dyn Fn(&mut Graph<f64>, &[Var]) -> Var>)> = vec![
            ("matmul", vec![a.clone(), m.clone()], Box::new(|g, v| g.matmul(v[0], v[1]))),
            ("transpose", vec![a.clone()], Box::new(|g, v| g.transpose(v[0]))),
            ("matmul_t", vec![a.clone(), b.clone()], Box::new(|g, v| g.matmul_t(v[0], v[1]))),
            ("add", vec![a.clone(), b.clone()], Box::new(|g, v| g.add(v[0], v[1]))),
            ("sub", vec![a.clone(), b.clone()], Box::new(|g, v| g.sub(v[0], v[1]))),
            ("mul", vec![a.clone(), b.clone()], Box::new(|g, v| g.mul(v[0], v[1]))),
            ("add_row", vec![a.clone(), row.clone()], Box::new(|g, v| g.add_row(v[0], v[1]))),
            ("mul_row", vec![a.clone(), row.clone()], Box::new(|g, v| g.mul_row(v[0], v[1]))),
            ("add_scalar", vec![a.clone(), s.clone()], Box::new(|g, v| g.add_scalar(v[0], v[1]))),
            ("mul_scalar", vec![a.clone(), s.clone()], Box::new(|g, v| g.mul_scalar(v[0], v[1]))),
            ("ln", vec![pos.clone()], Box::new(|g, v| g.ln(v[0]))),
            ("scale", vec![a.clone()], Box::new(|g, v| g.scale(v[0], -1.7))),
            ("mul_const", vec![a.clone()], {
                let k = b.clone();
                Box::new(move |g, v| g.mul_const(v[0], k.clone()))
            }),
            ("relu", vec![away_from_zero(&mut rng, 3, 4, 1e-3)], Box::new(|g, v| g.relu(v[0]))),
            ("sigmoid", vec![c.clone()], Box::new(|g, v| g.sigmoid(v[0]))),
            (
                "pow_scalar_base",
                vec![base.clone(), expo.clone()],
                Box::new(|g, v| g.pow_scalar_base(v[0], v[1])),
            ),
            ("softmax_rows", vec![c.clone()], Box::new(|g, v| g.softmax_rows(v[0]))),
            ("log_softmax_rows", vec![c.clone()], Box::new(|g, v| g.log_softmax_rows(v[0]))),
            (
                "entmax15_rows",
                vec![entmax_safe(&mut rng, 3, 6)],
                Box::new(|g, v| g.entmax15_rows(v[0])),
            ),
            ("normalize_rows", vec![c.clone()], Box::new(|g, v| g.normalize_rows(v[0], 1e-5))),
            (
                "layer_norm",
                vec![c.clone(), row.clone(), row.map(|x| x * 0.5)],
                Box::new(|g, v| g.layer_norm(v[0], v[1], v[2], 1e-5)),
            ),
            ("mean_rows", vec![a.clone()], Box::new(|g, v| g.mean_rows(v[0]))),
            ("sum", vec![a.clone()], Box::new(|g, v| g.sum(v[0]))),
            (
                "concat_cols",
                vec![a.clone(), b.map(|x| x * 0.3)],
                Box::new(|g, v| g.concat_cols(&[v[0], v[1]])),
            ),
            ("slice_cols", vec![m.clone()], Box::new(|g, v| g.slice_cols(v[0], 1, 4))),
            ("dropout", vec![a.clone()], {
                let keep = keep.clone();
                Box::new(move |g, v| g.dropout(v[0], &keep, 0.3))
            }),
            ("cross_entropy", vec![c.clone()], Box::new(|g, v| g.cross_entropy(v[0], &[0, 3, 1]))),
        ];
        for (name, inputs, op) in &cases {
            check_primitive(name, inputs, seed, op.as_ref());
        }
    }
}

#[test]
fn xavier_is_seeded() {
    let a: Tensor<f64> = xavier_uniform_init(&[4, 6], 9).unwrap();
    let b: Tensor<f64> = xavier_uniform_init(&[4, 6], 9).unwrap();
    assert_eq!(a, b);
    let bound = (6.0f64 / 10.0).sqrt();
    assert!(a.data().iter().all(|v| v.abs() <= bound));
}
