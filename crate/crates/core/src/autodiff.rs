//! Reverse-mode differentiation over a recorded graph of matrix operations.
//!
//! A [`Graph`] is an append-only tape. Every operation evaluates eagerly and
//! records enough to replay its vector-Jacobian product. [`Graph::backward`]
//! consumes the tape, so a graph lives for exactly one forward/backward pass.

use crate::entmax;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Handle to a node on a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug)]
enum Op<T> {
    Leaf,
    MatMul(Var, Var),
    Transpose(Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddRow(Var, Var),
    MulRow(Var, Var),
    AddScalar(Var, Var),
    MulScalar(Var, Var),
    Scale(Var, T),
    Ln(Var),
    MulConst(Var, Tensor<T>),
    Relu(Var),
    Sigmoid(Var),
    PowScalarBase(Var, Var),
    SoftmaxRows(Var),
    LogSoftmaxRows(Var),
    EntmaxRows(Var),
    /// Saves the per-row inverse standard deviation.
    NormalizeRows(Var, Vec<T>),
    MeanRows(Var),
    Sum(Var),
    ConcatCols(Vec<Var>),
    SliceCols(Var, usize),
}

#[derive(Debug)]
struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
    needs_grad: bool,
}

#[derive(Debug, Default)]
pub struct Graph<T> {
    nodes: Vec<Node<T>>,
}

/// Gradients produced by [`Graph::backward`], indexed by [`Var`].
#[derive(Debug)]
pub struct Gradients<T> {
    grads: Vec<Option<Tensor<T>>>,
}

impl<T: Scalar> Gradients<T> {
    pub fn get(&self, v: Var) -> Option<&Tensor<T>> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    pub fn take(&mut self, v: Var) -> Option<Tensor<T>> {
        self.grads.get_mut(v.0).and_then(Option::take)
    }
}

fn accumulate<T: Scalar>(slot: &mut Option<Tensor<T>>, g: Tensor<T>) {
    match slot {
        Some(acc) => acc.add_assign(&g),
        None => *slot = Some(g),
    }
}

fn map_rows<T: Scalar>(x: &Tensor<T>, f: impl Fn(&[T]) -> Vec<T>) -> Tensor<T> {
    let mut data = Vec::with_capacity(x.len());
    for i in 0..x.rows() {
        data.extend(f(x.row(i)));
    }
    Tensor::matrix(x.rows(), x.cols(), data)
}

fn zip_rows<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>, f: impl Fn(&[T], &[T]) -> Vec<T>) -> Tensor<T> {
    let mut data = Vec::with_capacity(a.len());
    for i in 0..a.rows() {
        data.extend(f(a.row(i), b.row(i)));
    }
    Tensor::matrix(a.rows(), a.cols(), data)
}

fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

impl<T: Scalar> Graph<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>, needs_grad: bool) -> Var {
        self.nodes.push(Node { value, op, needs_grad });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    /// Scalar value of a 1×1 node.
    pub fn scalar(&self, v: Var) -> T {
        self.value(v).data()[0]
    }

    /// Differentiable input.
    pub fn param(&mut self, t: Tensor<T>) -> Var {
        self.push(t, Op::Leaf, true)
    }

    pub fn constant(&mut self, t: Tensor<T>) -> Var {
        self.push(t, Op::Leaf, false)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).matmul(self.value(b));
        let ng = self.needs(a) || self.needs(b);
        self.push(v, Op::MatMul(a, b), ng)
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let v = self.value(a).transpose();
        let ng = self.needs(a);
        self.push(v, Op::Transpose(a), ng)
    }

    /// `a · bᵀ`.
    pub fn matmul_t(&mut self, a: Var, b: Var) -> Var {
        let bt = self.transpose(b);
        self.matmul(a, bt)
    }

    fn check_same(&self, a: Var, b: Var, what: &str) {
        assert!(
            self.value(a).same_shape(self.value(b)),
            "{what}: shapes {:?} and {:?}",
            self.value(a).shape(),
            self.value(b).shape()
        );
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        self.check_same(a, b, "add");
        let v = self.value(a).zip_map(self.value(b), |x, y| x + y);
        let ng = self.needs(a) || self.needs(b);
        self.push(v, Op::Add(a, b), ng)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        self.check_same(a, b, "sub");
        let v = self.value(a).zip_map(self.value(b), |x, y| x - y);
        let ng = self.needs(a) || self.needs(b);
        self.push(v, Op::Sub(a, b), ng)
    }

    /// Elementwise (Hadamard) product.
    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        self.check_same(a, b, "mul");
        let v = self.value(a).zip_map(self.value(b), |x, y| x * y);
        let ng = self.needs(a) || self.needs(b);
        self.push(v, Op::Mul(a, b), ng)
    }

    /// Adds a `1 × cols` row to every row of `a`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Var {
        let av = self.value(a);
        let rv = self.value(row);
        assert_eq!((rv.rows(), rv.cols()), (1, av.cols()), "add_row shape");
        let r = rv.data();
        let v = zip_rows(av, av, |x, _| x.iter().zip(r).map(|(&p, &q)| p + q).collect());
        let ng = self.needs(a) || self.needs(row);
        self.push(v, Op::AddRow(a, row), ng)
    }

    /// Multiplies every row of `a` elementwise by a `1 × cols` row.
    pub fn mul_row(&mut self, a: Var, row: Var) -> Var {
        let av = self.value(a);
        let rv = self.value(row);
        assert_eq!((rv.rows(), rv.cols()), (1, av.cols()), "mul_row shape");
        let r = rv.data();
        let v = zip_rows(av, av, |x, _| x.iter().zip(r).map(|(&p, &q)| p * q).collect());
        let ng = self.needs(a) || self.needs(row);
        self.push(v, Op::MulRow(a, row), ng)
    }

    /// Adds a 1×1 node to every element of `a`.
    pub fn add_scalar(&mut self, a: Var, s: Var) -> Var {
        assert_eq!(self.value(s).len(), 1, "add_scalar needs a 1×1 operand");
        let c = self.scalar(s);
        let v = self.value(a).map(|x| x + c);
        let ng = self.needs(a) || self.needs(s);
        self.push(v, Op::AddScalar(a, s), ng)
    }

    /// Multiplies every element of `a` by a 1×1 node.
    pub fn mul_scalar(&mut self, a: Var, s: Var) -> Var {
        assert_eq!(self.value(s).len(), 1, "mul_scalar needs a 1×1 operand");
        let c = self.scalar(s);
        let v = self.value(a).map(|x| x * c);
        let ng = self.needs(a) || self.needs(s);
        self.push(v, Op::MulScalar(a, s), ng)
    }

    pub fn ln(&mut self, a: Var) -> Var {
        let v = self.value(a).map(|x| x.ln());
        let ng = self.needs(a);
        self.push(v, Op::Ln(a), ng)
    }

    pub fn scale(&mut self, a: Var, c: T) -> Var {
        let v = self.value(a).scale(c);
        let ng = self.needs(a);
        self.push(v, Op::Scale(a, c), ng)
    }

    /// Elementwise product with a non-differentiable tensor (dropout masks,
    /// one-hot selections, fixed priors).
    pub fn mul_const(&mut self, a: Var, c: Tensor<T>) -> Var {
        assert!(self.value(a).same_shape(&c), "mul_const shape");
        let v = self.value(a).zip_map(&c, |x, y| x * y);
        let ng = self.needs(a);
        self.push(v, Op::MulConst(a, c), ng)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let v = self.value(a).map(|x| x.max(T::zero()));
        let ng = self.needs(a);
        self.push(v, Op::Relu(a), ng)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let v = self.value(a).map(sigmoid);
        let ng = self.needs(a);
        self.push(v, Op::Sigmoid(a), ng)
    }

    /// `base^exponent` elementwise, with a positive 1×1 `base`.
    pub fn pow_scalar_base(&mut self, base: Var, exponent: Var) -> Var {
        assert_eq!(self.value(base).len(), 1, "pow base must be 1×1");
        let b = self.scalar(base);
        let v = self.value(exponent).map(|e| b.powf(e));
        let ng = self.needs(base) || self.needs(exponent);
        self.push(v, Op::PowScalarBase(base, exponent), ng)
    }

    pub fn softmax_rows(&mut self, a: Var) -> Var {
        let v = map_rows(self.value(a), entmax::softmax);
        let ng = self.needs(a);
        self.push(v, Op::SoftmaxRows(a), ng)
    }

    pub fn log_softmax_rows(&mut self, a: Var) -> Var {
        let v = map_rows(self.value(a), entmax::log_softmax);
        let ng = self.needs(a);
        self.push(v, Op::LogSoftmaxRows(a), ng)
    }

    pub fn entmax15_rows(&mut self, a: Var) -> Var {
        let v = map_rows(self.value(a), entmax::entmax15);
        let ng = self.needs(a);
        self.push(v, Op::EntmaxRows(a), ng)
    }

    /// Row-wise standardisation `(x − μ) / √(σ² + eps)` without affine terms.
    pub fn normalize_rows(&mut self, a: Var, eps: T) -> Var {
        let x = self.value(a);
        let n = T::of_usize(x.cols());
        let mut inv_std = Vec::with_capacity(x.rows());
        let mut data = Vec::with_capacity(x.len());
        for i in 0..x.rows() {
            let row = x.row(i);
            let mean = row.iter().copied().sum::<T>() / n;
            let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / n;
            let inv = T::one() / (var + eps).sqrt();
            inv_std.push(inv);
            data.extend(row.iter().map(|&v| (v - mean) * inv));
        }
        let v = Tensor::matrix(x.rows(), x.cols(), data);
        let ng = self.needs(a);
        self.push(v, Op::NormalizeRows(a, inv_std), ng)
    }

    /// Layer normalisation with learnable gain and bias rows.
    pub fn layer_norm(&mut self, a: Var, gain: Var, bias: Var, eps: T) -> Var {
        let n = self.normalize_rows(a, eps);
        let g = self.mul_row(n, gain);
        self.add_row(g, bias)
    }

    /// Column means: `rows × cols → 1 × cols`.
    pub fn mean_rows(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let inv = T::one() / T::of_usize(x.rows());
        let mut out = vec![T::zero(); x.cols()];
        for i in 0..x.rows() {
            for (o, &v) in out.iter_mut().zip(x.row(i)) {
                *o += v;
            }
        }
        for o in &mut out {
            *o *= inv;
        }
        let v = Tensor::row_vector(out);
        let ng = self.needs(a);
        self.push(v, Op::MeanRows(a), ng)
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let v = Tensor::scalar(self.value(a).sum());
        let ng = self.needs(a);
        self.push(v, Op::Sum(a), ng)
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        assert!(!parts.is_empty(), "concat of nothing");
        let rows = self.value(parts[0]).rows();
        let cols: usize = parts.iter().map(|&p| self.value(p).cols()).sum();
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for &p in parts {
                let pv = self.value(p);
                assert_eq!(pv.rows(), rows, "concat row mismatch");
                data.extend_from_slice(pv.row(i));
            }
        }
        let ng = parts.iter().any(|&p| self.needs(p));
        self.push(Tensor::matrix(rows, cols, data), Op::ConcatCols(parts.to_vec()), ng)
    }

    /// Columns `start..end` of `a`.
    pub fn slice_cols(&mut self, a: Var, start: usize, end: usize) -> Var {
        let x = self.value(a);
        assert!(start <= end && end <= x.cols(), "slice bounds");
        let mut data = Vec::with_capacity(x.rows() * (end - start));
        for i in 0..x.rows() {
            data.extend_from_slice(&x.row(i)[start..end]);
        }
        let v = Tensor::matrix(x.rows(), end - start, data);
        let ng = self.needs(a);
        self.push(v, Op::SliceCols(a, start), ng)
    }

    /// Inverted dropout driven by an externally supplied keep mask.
    pub fn dropout(&mut self, a: Var, keep: &[bool], rate: T) -> Var {
        let scale = T::one() / (T::one() - rate);
        let x = self.value(a);
        let mask: Vec<T> = keep.iter().map(|&k| if k { scale } else { T::zero() }).collect();
        let mask = Tensor::matrix(x.rows(), x.cols(), mask);
        self.mul_const(a, mask)
    }

    /// Mean cross-entropy of row-wise logits against class labels.
    pub fn cross_entropy(&mut self, logits: Var, labels: &[usize]) -> Var {
        let (rows, cols) = (self.value(logits).rows(), self.value(logits).cols());
        assert_eq!(rows, labels.len(), "one label per row");
        let mut onehot = Tensor::zeros(&[rows, cols]);
        for (i, &l) in labels.iter().enumerate() {
            onehot.set(i, l, T::one());
        }
        let logp = self.log_softmax_rows(logits);
        let picked = self.mul_const(logp, onehot);
        let total = self.sum(picked);
        self.scale(total, -T::one() / T::of_usize(rows))
    }

    /// Reverse sweep from a scalar `loss`. Consumes the tape.
    pub fn backward(self, loss: Var) -> Result<Gradients<T>> {
        let n_loss = self.value(loss).len();
        if n_loss != 1 {
            return Err(Error::NotScalar(n_loss));
        }
        let nodes = self.nodes;
        let mut grads: Vec<Option<Tensor<T>>> = (0..nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::full(nodes[loss.0].value.shape(), T::one()));

        for idx in (0..=loss.0).rev() {
            let node = &nodes[idx];
            if !node.needs_grad {
                continue;
            }
            let g = match &node.op {
                Op::Leaf => continue,
                _ => match grads[idx].take() {
                    Some(g) => g,
                    None => continue,
                },
            };
            let val = |v: Var| &nodes[v.0].value;
            let mut send = |v: Var, t: Tensor<T>| {
                if nodes[v.0].needs_grad {
                    accumulate(&mut grads[v.0], t);
                }
            };
            match &node.op {
                Op::Leaf => unreachable!(),
                Op::MatMul(a, b) => {
                    if nodes[a.0].needs_grad {
                        send(*a, g.matmul_t(val(*b)));
                    }
                    if nodes[b.0].needs_grad {
                        send(*b, val(*a).t_matmul(&g));
                    }
                }
                Op::Transpose(a) => send(*a, g.transpose()),
                Op::Add(a, b) => {
                    send(*a, g.clone());
                    send(*b, g);
                }
                Op::Sub(a, b) => {
                    send(*b, g.scale(-T::one()));
                    send(*a, g);
                }
                Op::Mul(a, b) => {
                    send(*a, g.zip_map(val(*b), |x, y| x * y));
                    send(*b, g.zip_map(val(*a), |x, y| x * y));
                }
                Op::AddRow(a, row) => {
                    let mut r = vec![T::zero(); g.cols()];
                    for i in 0..g.rows() {
                        for (o, &x) in r.iter_mut().zip(g.row(i)) {
                            *o += x;
                        }
                    }
                    send(*row, Tensor::row_vector(r));
                    send(*a, g);
                }
                Op::MulRow(a, row) => {
                    let rv = val(*row).data();
                    let av = val(*a);
                    let mut r = vec![T::zero(); g.cols()];
                    for i in 0..g.rows() {
                        for ((o, &x), &y) in r.iter_mut().zip(g.row(i)).zip(av.row(i)) {
                            *o += x * y;
                        }
                    }
                    let ga = zip_rows(&g, &g, |x, _| x.iter().zip(rv).map(|(&p, &q)| p * q).collect());
                    send(*row, Tensor::row_vector(r));
                    send(*a, ga);
                }
                Op::AddScalar(a, s) => {
                    send(*s, Tensor::scalar(g.sum()));
                    send(*a, g);
                }
                Op::MulScalar(a, s) => {
                    if nodes[s.0].needs_grad {
                        let gs: T = g.data().iter().zip(val(*a).data()).map(|(&x, &y)| x * y).sum();
                        send(*s, Tensor::scalar(gs));
                    }
                    let c = val(*s).data()[0];
                    send(*a, g.scale(c));
                }
                Op::Scale(a, c) => send(*a, g.scale(*c)),
                Op::Ln(a) => send(*a, g.zip_map(val(*a), |x, y| x / y)),
                Op::MulConst(a, c) => send(*a, g.zip_map(c, |x, y| x * y)),
                Op::Relu(a) => {
                    let ga = g.zip_map(val(*a), |x, y| if y > T::zero() { x } else { T::zero() });
                    send(*a, ga);
                }
                Op::Sigmoid(a) => {
                    let ga = g.zip_map(&node.value, |x, s| x * s * (T::one() - s));
                    send(*a, ga);
                }
                Op::PowScalarBase(base, exponent) => {
                    let b = val(*base).data()[0];
                    let ln_b = b.ln();
                    if nodes[base.0].needs_grad {
                        let gb: T = g
                            .data()
                            .iter()
                            .zip(node.value.data())
                            .zip(val(*exponent).data())
                            .map(|((&gi, &out), &e)| gi * e * out / b)
                            .sum();
                        send(*base, Tensor::scalar(gb));
                    }
                    if nodes[exponent.0].needs_grad {
                        send(*exponent, g.zip_map(&node.value, |x, out| x * out * ln_b));
                    }
                }
                Op::SoftmaxRows(a) => send(*a, zip_rows(&node.value, &g, entmax::softmax_vjp)),
                Op::EntmaxRows(a) => send(*a, zip_rows(&node.value, &g, entmax::entmax15_vjp)),
                Op::LogSoftmaxRows(a) => {
                    let ga = zip_rows(&node.value, &g, |lp, gr| {
                        let total: T = gr.iter().copied().sum();
                        lp.iter().zip(gr).map(|(&l, &x)| x - l.exp() * total).collect()
                    });
                    send(*a, ga);
                }
                Op::NormalizeRows(a, inv_std) => {
                    let y = &node.value;
                    let n = T::of_usize(y.cols());
                    let mut data = Vec::with_capacity(y.len());
                    for i in 0..y.rows() {
                        let (yr, gr) = (y.row(i), g.row(i));
                        let mg = gr.iter().copied().sum::<T>() / n;
                        let mgy = gr.iter().zip(yr).map(|(&p, &q)| p * q).sum::<T>() / n;
                        data.extend(yr.iter().zip(gr).map(|(&yy, &gg)| inv_std[i] * (gg - mg - yy * mgy)));
                    }
                    send(*a, Tensor::matrix(y.rows(), y.cols(), data));
                }
                Op::MeanRows(a) => {
                    let rows = val(*a).rows();
                    let inv = T::one() / T::of_usize(rows);
                    let mut data = Vec::with_capacity(rows * g.cols());
                    for _ in 0..rows {
                        data.extend(g.data().iter().map(|&x| x * inv));
                    }
                    send(*a, Tensor::matrix(rows, g.cols(), data));
                }
                Op::Sum(a) => {
                    let s = g.data()[0];
                    send(*a, Tensor::full(val(*a).shape(), s));
                }
                Op::ConcatCols(parts) => {
                    let mut offset = 0;
                    for &p in parts {
                        let w = val(p).cols();
                        let mut data = Vec::with_capacity(g.rows() * w);
                        for i in 0..g.rows() {
                            data.extend_from_slice(&g.row(i)[offset..offset + w]);
                        }
                        offset += w;
                        send(p, Tensor::matrix(g.rows(), w, data));
                    }
                }
                Op::SliceCols(a, start) => {
                    let src = val(*a);
                    let mut full = Tensor::zeros(&[src.rows(), src.cols()]);
                    for i in 0..g.rows() {
                        full.row_mut(i)[*start..*start + g.cols()].copy_from_slice(g.row(i));
                    }
                    send(*a, full);
                }
            }
        }
        Ok(Gradients { grads })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sum_gives_ones() {
        let mut g = Graph::<f64>::new();
        let x = g.param(Tensor::row_vector(vec![1.0, -2.0, 3.0]));
        let s = g.sum(x);
        let grads = g.backward(s).unwrap();
        assert_eq!(grads.get(x).unwrap().data(), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn square_sum_gradient() {
        let mut g = Graph::<f64>::new();
        let x = g.param(Tensor::row_vector(vec![1.0, 2.0]));
        let sq = g.mul(x, x);
        let s = g.sum(sq);
        let grads = g.backward(s).unwrap();
        assert_eq!(grads.get(x).unwrap().data(), &[2.0, 4.0]);
    }

    #[test]
    fn non_scalar_loss_rejected() {
        let mut g = Graph::<f64>::new();
        let x = g.param(Tensor::row_vector(vec![1.0, 2.0]));
        assert!(matches!(g.backward(x), Err(Error::NotScalar(2))));
    }

    #[test]
    fn constants_receive_no_gradient() {
        let mut g = Graph::<f64>::new();
        let c = g.constant(Tensor::row_vector(vec![1.0, 2.0]));
        let x = g.param(Tensor::row_vector(vec![3.0, 4.0]));
        let p = g.mul(c, x);
        let s = g.sum(p);
        let grads = g.backward(s).unwrap();
        assert!(grads.get(c).is_none());
        assert_eq!(grads.get(x).unwrap().data(), &[1.0, 2.0]);
    }
}
