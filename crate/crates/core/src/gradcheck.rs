//! Central finite differences, used as the oracle for analytic gradients.

use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// `(f(x + h·eᵢ) − f(x − h·eᵢ)) / 2h` for every coordinate of `x`.
pub fn finite_diff_grad<T: Scalar>(mut f: impl FnMut(&Tensor<T>) -> T, x: &Tensor<T>, h: T) -> Tensor<T> {
    let mut probe = x.clone();
    let mut out = Tensor::zeros(x.shape());
    for i in 0..x.len() {
        let orig = probe.data()[i];
        probe.data_mut()[i] = orig + h;
        let fp = f(&probe);
        probe.data_mut()[i] = orig - h;
        let fm = f(&probe);
        probe.data_mut()[i] = orig;
        out.data_mut()[i] = (fp - fm) / (h + h);
    }
    out
}

/// `‖a − b‖ / max(‖a‖, ‖b‖, floor)`.
pub fn relative_error<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>, floor: T) -> T {
    let diff = a.zip_map(b, |x, y| x - y).norm();
    diff / a.norm().max(b.norm()).max(floor)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sum_gives_ones() {
        let x = Tensor::<f64>::row_vector(vec![0.3, -1.0, 7.0]);
        let g = finite_diff_grad(|t| t.sum(), &x, 1e-5);
        assert!(g.data().iter().all(|&v| (v - 1.0).abs() < 1e-9));
    }

    #[test]
    fn quadratic_is_exact() {
        let x = Tensor::<f64>::scalar(3.0);
        let g = finite_diff_grad(|t| t.data()[0] * t.data()[0], &x, 1e-5);
        assert!((g.data()[0] - 6.0).abs() < 1e-8);
    }
}
