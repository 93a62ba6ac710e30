//! Parameter initialisation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Xavier/Glorot uniform: i.i.d. `U[−a, a]` with `a = √(6 / (fan_in + fan_out))`.
///
/// `fan_in` is the first dimension and `fan_out` the product of the rest.
pub fn xavier_uniform_init<T: Scalar>(shape: &[usize], seed: u64) -> Result<Tensor<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    xavier_uniform_with(shape, &mut rng)
}

pub fn xavier_uniform_with<T: Scalar, R: Rng>(shape: &[usize], rng: &mut R) -> Result<Tensor<T>> {
    if shape.len() < 2 {
        return Err(Error::BadShape(shape.to_vec()));
    }
    let fan_in = shape[0];
    let fan_out: usize = shape[1..].iter().product();
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let n: usize = shape.iter().product();
    let data = (0..n).map(|_| T::of(rng.random_range(-bound..=bound))).collect();
    Tensor::new(shape.to_vec(), data)
}

/// Modified Gram–Schmidt on the rows of a `K × d` matrix; rows come back
/// orthonormal and row `k` spans the same subspace as input rows `0..=k`.
pub fn gram_schmidt<T: Scalar>(c: &Tensor<T>) -> Result<Tensor<T>> {
    let (k, d) = (c.rows(), c.cols());
    if k > d {
        return Err(Error::ShapeMismatch(format!("cannot orthogonalise {k} rows in dimension {d}")));
    }
    let tol = T::of(1e-10);
    let mut out = c.clone();
    for i in 0..k {
        for j in 0..i {
            let (done, rest) = out.data_mut().split_at_mut(i * d);
            let basis = &done[j * d..(j + 1) * d];
            let row = &mut rest[..d];
            let proj: T = row.iter().zip(basis).map(|(&a, &b)| a * b).sum();
            for (r, &b) in row.iter_mut().zip(basis) {
                *r -= proj * b;
            }
        }
        let row = out.row_mut(i);
        let norm = row.iter().map(|&x| x * x).sum::<T>().sqrt();
        if norm < tol {
            return Err(Error::RankDeficient(i));
        }
        for r in row.iter_mut() {
            *r /= norm;
        }
    }
    Ok(out)
}
