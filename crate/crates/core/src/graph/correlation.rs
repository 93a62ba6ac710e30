use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// ROI × timepoint signal matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesMatrix<T> {
    values: Tensor<T>,
}

impl<T: Scalar> TimeSeriesMatrix<T> {
    /// Validates shape (`N ≥ 1`, `T ≥ 2`) and rejects constant rows.
    pub fn new(values: Tensor<T>) -> Result<Self> {
        if values.shape().len() != 2 || values.rows() == 0 || values.cols() < 2 {
            return Err(Error::ShapeMismatch(format!(
                "time series must be N×T with T ≥ 2, got {:?}",
                values.shape()
            )));
        }
        for i in 0..values.rows() {
            if centered(values.row(i)).is_none() {
                return Err(Error::ConstantRow(i));
            }
        }
        Ok(Self { values })
    }

    pub fn roi_count(&self) -> usize {
        self.values.rows()
    }

    pub fn length(&self) -> usize {
        self.values.cols()
    }

    pub fn values(&self) -> &Tensor<T> {
        &self.values
    }
}

/// Centered, unit-norm copy of a row; `None` when the row has no variance.
fn centered<T: Scalar>(row: &[T]) -> Option<Vec<T>> {
    let n = T::of_usize(row.len());
    let mean = row.iter().copied().sum::<T>() / n;
    let c: Vec<T> = row.iter().map(|&x| x - mean).collect();
    let norm = c.iter().map(|&x| x * x).sum::<T>().sqrt();
    let scale = row.iter().fold(T::zero(), |m, &x| m.max(x.abs()));
    if !norm.is_finite() || norm <= scale * T::epsilon() * n {
        return None;
    }
    Some(c.into_iter().map(|x| x / norm).collect())
}

/// Symmetric Pearson correlation matrix with unit diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix<T> {
    r: Tensor<T>,
}

impl<T: Scalar> CorrelationMatrix<T> {
    /// Accepts a precomputed matrix after checking the invariants.
    pub fn new(r: Tensor<T>) -> Result<Self> {
        let n = r.rows();
        if r.shape().len() != 2 || r.cols() != n || n == 0 {
            return Err(Error::ShapeMismatch(format!(
                "correlation matrix must be square, got {:?}",
                r.shape()
            )));
        }
        for i in 0..n {
            if r.at(i, i) != T::one() {
                return Err(Error::BadConfig(format!("diagonal entry {i} is not 1")));
            }
            for j in 0..n {
                let v = r.at(i, j);
                if !(v.abs() <= T::one()) {
                    return Err(Error::BadConfig(format!("entry ({i},{j}) = {v} outside [-1,1]")));
                }
                if v != r.at(j, i) {
                    return Err(Error::BadConfig(format!("entry ({i},{j}) breaks symmetry")));
                }
            }
        }
        Ok(Self { r })
    }

    pub fn n(&self) -> usize {
        self.r.rows()
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.r.at(i, j)
    }

    pub fn as_tensor(&self) -> &Tensor<T> {
        &self.r
    }

    /// Dense denominator of the wiring cost, `Σ_{i<j} |r_ij|`.
    pub fn total_abs_weight(&self) -> T {
        let n = self.n();
        let mut total = T::zero();
        for i in 0..n {
            for j in i + 1..n {
                total += self.r.at(i, j).abs();
            }
        }
        total
    }
}

/// Pearson correlation between all pairs of ROI rows.
pub fn pearson_correlation<T: Scalar>(ts: &TimeSeriesMatrix<T>) -> Result<CorrelationMatrix<T>> {
    let v = ts.values();
    let n = v.rows();
    let rows: Vec<Vec<T>> = (0..n)
        .map(|i| centered(v.row(i)).ok_or(Error::ConstantRow(i)))
        .collect::<Result<_>>()?;
    let mut r = Tensor::identity(n);
    for i in 0..n {
        for j in i + 1..n {
            let c: T = rows[i].iter().zip(&rows[j]).map(|(&a, &b)| a * b).sum();
            let c = c.max(-T::one()).min(T::one());
            r.set(i, j, c);
            r.set(j, i, c);
        }
    }
    Ok(CorrelationMatrix { r })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ts(rows: &[Vec<f64>]) -> TimeSeriesMatrix<f64> {
        TimeSeriesMatrix::new(Tensor::from_rows(rows)).unwrap()
    }

    /// Textbook two-pass formula, written independently.
    fn pearson_oracle(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
        let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / (n - 1.0);
        let sa = (a.iter().map(|x| (x - ma).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        let sb = (b.iter().map(|y| (y - mb).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        cov / (sa * sb)
    }

    #[test]
    fn identical_and_flipped_rows() {
        let r = pearson_correlation(&ts(&[
            vec![1.0, 3.0, 2.0, 5.0],
            vec![1.0, 3.0, 2.0, 5.0],
            vec![-1.0, -3.0, -2.0, -5.0],
        ]))
        .unwrap();
        assert!((r.get(0, 1) - 1.0).abs() < 1e-15);
        assert!((r.get(0, 2) + 1.0).abs() < 1e-15);
        assert_eq!(r.get(1, 1), 1.0);
    }

    #[test]
    fn hand_computed_value() {
        let a = vec![1.0, 2.0, 3.0, 4.0];
        let b = vec![1.0, 3.0, 2.0, 4.0];
        let oracle = pearson_oracle(&a, &b);
        assert!((oracle - 0.8).abs() < 1e-15);
        let r = pearson_correlation(&ts(&[a, b])).unwrap();
        assert!((r.get(0, 1) - 0.8).abs() < 1e-15);
        assert_eq!(r.get(0, 1), r.get(1, 0));
    }

    #[test]
    fn constant_row_rejected() {
        let err = TimeSeriesMatrix::new(Tensor::<f64>::from_rows(&[vec![1.0, 2.0], vec![3.0, 3.0]]));
        assert!(matches!(err, Err(Error::ConstantRow(1))));
        assert!(TimeSeriesMatrix::new(Tensor::<f64>::from_rows(&[vec![1.0]])).is_err());
    }

    #[test]
    fn correlation_validation() {
        let bad = Tensor::<f64>::from_rows(&[vec![1.0, 0.5], vec![0.4, 1.0]]);
        assert!(CorrelationMatrix::new(bad).is_err());
        let ok = Tensor::<f64>::from_rows(&[vec![1.0, 0.5], vec![0.5, 1.0]]);
        assert!((CorrelationMatrix::new(ok).unwrap().total_abs_weight() - 0.5).abs() < 1e-15);
    }
}
