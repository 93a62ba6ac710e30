//! Probability maps onto the simplex: softmax and 1.5-entmax.
//!
//! 1.5-entmax solves `argmax_p ⟨p, z⟩ + H_1.5(p)` over the simplex. The
//! solution has the closed form `p_i = max(0, z_i/2 − τ)²` with `τ` chosen so
//! that the mass is one. `τ` is found exactly by scanning the sorted scores:
//! for a support of size `ρ`, `τ` solves a quadratic whose coefficients are
//! the running mean and second moment of the top-`ρ` scores.

use crate::scalar::Scalar;

/// Max-subtracted softmax.
pub fn softmax<T: Scalar>(logits: &[T]) -> Vec<T> {
    let max = logits.iter().fold(T::neg_infinity(), |m, &x| m.max(x));
    let mut out: Vec<T> = logits.iter().map(|&x| (x - max).exp()).collect();
    let total: T = out.iter().copied().sum();
    for p in &mut out {
        *p /= total;
    }
    out
}

pub fn log_softmax<T: Scalar>(logits: &[T]) -> Vec<T> {
    let max = logits.iter().fold(T::neg_infinity(), |m, &x| m.max(x));
    let lse = logits.iter().map(|&x| (x - max).exp()).sum::<T>().ln() + max;
    logits.iter().map(|&x| x - lse).collect()
}

/// Vector-Jacobian product of softmax given its output `p`.
pub fn softmax_vjp<T: Scalar>(p: &[T], grad: &[T]) -> Vec<T> {
    let dot: T = p.iter().zip(grad).map(|(&a, &b)| a * b).sum();
    p.iter().zip(grad).map(|(&pi, &gi)| pi * (gi - dot)).collect()
}

/// Threshold `τ` of 1.5-entmax, expressed on the max-shifted half scores.
///
/// Returns `(shift, τ)` so that `p_i = max(0, z_i/2 − shift − τ)²`.
fn entmax15_threshold<T: Scalar>(logits: &[T]) -> (T, T) {
    let half = T::of(0.5);
    let max = logits.iter().fold(T::neg_infinity(), |m, &x| m.max(x)) * half;
    let mut sorted: Vec<T> = logits.iter().map(|&x| x * half - max).collect();
    sorted.sort_by(|a, b| b.partial_cmp(a).expect("finite logits"));

    let mut cum = T::zero();
    let mut cum_sq = T::zero();
    let mut tau_star = T::zero();
    for (idx, &x) in sorted.iter().enumerate() {
        let rho = T::of_usize(idx + 1);
        cum += x;
        cum_sq += x * x;
        let mean = cum / rho;
        let mean_sq = cum_sq / rho;
        let ss = rho * (mean_sq - mean * mean);
        let delta = ((T::one() - ss) / rho).max(T::zero());
        let tau = mean - delta.sqrt();
        if tau <= x {
            tau_star = tau;
        } else {
            break;
        }
    }
    (max, tau_star)
}

/// Exact 1.5-entmax by sorted threshold search.
pub fn entmax15<T: Scalar>(logits: &[T]) -> Vec<T> {
    if logits.is_empty() {
        return Vec::new();
    }
    let (shift, tau) = entmax15_threshold(logits);
    let half = T::of(0.5);
    let mut out: Vec<T> = logits
        .iter()
        .map(|&z| {
            let d = (z * half - shift - tau).max(T::zero());
            d * d
        })
        .collect();
    // Rounding in the moment recursion leaves Σp a few ulps from one.
    let total: T = out.iter().copied().sum();
    for p in &mut out {
        *p /= total;
    }
    out
}

/// Vector-Jacobian product of 1.5-entmax given its output `p`.
///
/// With `s = √p` the Jacobian is `diag(s) − s sᵀ / Σs`, restricted to the
/// support. At support boundaries this is the interior subgradient.
pub fn entmax15_vjp<T: Scalar>(p: &[T], grad: &[T]) -> Vec<T> {
    let s: Vec<T> = p.iter().map(|&x| x.sqrt()).collect();
    let s_sum: T = s.iter().copied().sum();
    let sg: T = s.iter().zip(grad).map(|(&a, &b)| a * b).sum();
    let q = sg / s_sum;
    s.iter().zip(grad).map(|(&si, &gi)| si * (gi - q)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent oracle: bisection on τ for Σ max(0, z/2 − τ)² = 1.
    fn entmax_bisect(z: &[f64]) -> Vec<f64> {
        let half: Vec<f64> = z.iter().map(|x| x / 2.0).collect();
        let max = half.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let (mut lo, mut hi) = (max - 1.0, max);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let mass: f64 = half.iter().map(|x| (x - mid).max(0.0).powi(2)).sum();
            if mass > 1.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let tau = 0.5 * (lo + hi);
        half.iter().map(|x| (x - tau).max(0.0).powi(2)).collect()
    }

    #[test]
    fn softmax_uniform_and_saturated() {
        let p = softmax(&[0.3f64; 4]);
        assert!(p.iter().all(|&x| (x - 0.25).abs() < 1e-15));
        let p = softmax(&[0.0f64, 1000.0]);
        assert!(p[0] < 1e-300 && (p[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn softmax_matches_exponentiation() {
        let p = softmax(&[1.0f64, 2.0, 3.0]);
        let z: f64 = [1.0f64, 2.0, 3.0].iter().map(|x| x.exp()).sum();
        for (i, x) in [1.0f64, 2.0, 3.0].iter().enumerate() {
            assert!((p[i] - x.exp() / z).abs() < 1e-12);
        }
    }

    #[test]
    fn entmax_uniform_input() {
        let p = entmax15(&[0.7f64; 5]);
        assert!(p.iter().all(|&x| (x - 0.2).abs() < 1e-14));
    }

    #[test]
    fn entmax_large_gap_is_one_hot() {
        // z/2 gap of 1 collapses the support: (x − τ)² = 1 with τ = x − 1.
        let p = entmax15(&[0.0f64, 2.0]);
        assert_eq!(p, vec![0.0, 1.0]);
        let oracle = entmax_bisect(&[0.0, 2.0]);
        assert!(oracle[0] == 0.0 && (oracle[1] - 1.0).abs() < 1e-12);
        let p = entmax15(&[5.0f64, -1.0, 0.5]);
        assert_eq!(p, vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn entmax_matches_bisection_oracle() {
        let z = [0.3f64, -1.2, 0.8, 2.1, -0.4, 1.7, 0.0, 1.9];
        let p = entmax15(&z);
        let q = entmax_bisect(&z);
        for (a, b) in p.iter().zip(&q) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(p.iter().any(|&x| x == 0.0));
    }

    #[test]
    fn entmax_vjp_matches_finite_differences() {
        let z = [0.3f64, -0.2, 0.8, 0.5];
        let g = [1.0f64, -2.0, 0.5, 0.25];
        let analytic = entmax15_vjp(&entmax15(&z), &g);
        let h = 1e-6;
        for i in 0..z.len() {
            let mut zp = z;
            zp[i] += h;
            let mut zm = z;
            zm[i] -= h;
            let fp: f64 = entmax15(&zp).iter().zip(&g).map(|(a, b)| a * b).sum();
            let fm: f64 = entmax15(&zm).iter().zip(&g).map(|(a, b)| a * b).sum();
            let numeric = (fp - fm) / (2.0 * h);
            assert!((numeric - analytic[i]).abs() < 1e-7, "{i}: {numeric} vs {}", analytic[i]);
        }
    }

    #[test]
    fn log_softmax_consistent() {
        let z = [0.1f64, 2.0, -3.0];
        let a = log_softmax(&z);
        let b = softmax(&z);
        for (x, y) in a.iter().zip(&b) {
            assert!((x.exp() - y).abs() < 1e-15);
        }
    }

    #[test]
    fn works_in_single_precision() {
        let p = entmax15(&[0.1f32, 0.4, -0.3]);
        assert!((p.iter().sum::<f32>() - 1.0).abs() < 1e-6);
    }
}
