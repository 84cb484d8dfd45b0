use ndarray::{Array1, Array2, Axis};
use serde::Serialize;

use super::rows_of;
use crate::data::ReturnsMatrix;
use crate::error::Result;
use crate::linalg::sym_eigen;
use crate::scalar::Scalar;

/// Sample mean and covariance of a return panel.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentEstimates<T: Scalar> {
    pub mean: Array1<T>,
    /// Normalized by `1/T`, not `1/(T−1)`.
    pub covariance: Array2<T>,
}

#[derive(Serialize)]
struct MomentsDoc<'a, T> {
    tickers: &'a [String],
    mean: Vec<T>,
    covariance: Vec<Vec<T>>,
}

impl<T: Scalar> MomentEstimates<T> {
    pub fn to_json(&self, tickers: &[String]) -> Result<String> {
        let doc = MomentsDoc { tickers, mean: self.mean.to_vec(), covariance: rows_of(&self.covariance) };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    /// Smallest eigenvalue of the covariance.
    pub fn min_eigenvalue(&self) -> Result<T> {
        let (vals, _) = sym_eigen(self.covariance.view())?;
        Ok(vals[0])
    }
}

pub fn markowitz_moments<T: Scalar>(x: &ReturnsMatrix<T>) -> MomentEstimates<T> {
    let v = x.values();
    let t = T::from_usize_lossy(v.nrows());
    let mean = v.sum_axis(Axis(0)).mapv(|s| s / t);
    let centered = &v - &mean;
    let mut cov = centered.t().dot(&centered).mapv(|s| s / t);
    // exact symmetry
    let n = cov.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            cov[[j, i]] = cov[[i, j]];
        }
    }
    MomentEstimates { mean, covariance: cov }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn panel(v: Array2<f64>) -> ReturnsMatrix<f64> {
        let (t, n) = v.dim();
        ReturnsMatrix::new(v, (0..n).map(|i| format!("A{i}")).collect(), (0..t).map(|i| format!("{i:04}")).collect())
            .unwrap()
    }

    #[test]
    fn constant_column() {
        let m = markowitz_moments(&panel(array![[0.3, 1.0], [0.3, 2.0], [0.3, 0.0]]));
        assert!((m.mean[0] - 0.3).abs() < 1e-15);
        assert_eq!(m.covariance[[0, 0]], 0.0);
    }

    #[test]
    fn population_normalization() {
        let m = markowitz_moments(&panel(array![[0.0], [2.0]]));
        assert_eq!(m.mean[0], 1.0);
        assert_eq!(m.covariance[[0, 0]], 1.0);
    }

    #[test]
    fn row_permutation_invariance() {
        let a = markowitz_moments(&panel(array![[0.1, -0.2], [0.3, 0.05], [-0.1, 0.2]]));
        let b = markowitz_moments(&panel(array![[-0.1, 0.2], [0.1, -0.2], [0.3, 0.05]]));
        for (x, y) in a.covariance.iter().zip(b.covariance.iter()) {
            assert!((x - y).abs() < 1e-15);
        }
    }
}
