use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::moments::MomentEstimates;
use crate::error::{Error, Result};
use crate::linalg::{cholesky, spd_solve};
use crate::scalar::Scalar;

/// Investor views `P μ ≈ q` with confidence matrix `Ω` and weight `λ`.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewSpec<T: Scalar> {
    /// `V × N` view portfolios.
    pub p: Array2<T>,
    pub q: Array1<T>,
    /// `V × V`, symmetric positive definite.
    pub omega: Array2<T>,
    pub lambda: T,
}

/// JSON form: `{"p": [[..]], "q": [..], "omega": [[..]], "lambda": x}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ViewDoc<T> {
    pub p: Vec<Vec<T>>,
    pub q: Vec<T>,
    pub omega: Vec<Vec<T>>,
    #[serde(default)]
    pub lambda: T,
}

fn matrix_from_rows<T: Scalar>(rows: &[Vec<T>], what: &str) -> Result<Array2<T>> {
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Shape(format!("{what}: ragged rows")));
    }
    Array2::from_shape_vec((rows.len(), ncols), rows.concat()).map_err(|e| Error::Shape(format!("{what}: {e}")))
}

impl<T: Scalar> ViewSpec<T> {
    pub fn from_doc(doc: &ViewDoc<T>) -> Result<Self> {
        let spec = ViewSpec {
            p: matrix_from_rows(&doc.p, "P")?,
            q: Array1::from(doc.q.clone()),
            omega: matrix_from_rows(&doc.omega, "Omega")?,
            lambda: doc.lambda,
        };
        Ok(spec)
    }

    pub fn validate(&self, n_assets: usize) -> Result<()> {
        let v = self.p.nrows();
        if self.p.ncols() != n_assets {
            return Err(Error::Shape(format!("P has {} columns, expected {n_assets}", self.p.ncols())));
        }
        if self.q.len() != v || self.omega.dim() != (v, v) {
            return Err(Error::Shape(format!(
                "{v} views need q of length {v} and a {v}x{v} Omega (got {} and {:?})",
                self.q.len(),
                self.omega.dim()
            )));
        }
        if !(self.lambda >= T::zero() && self.lambda.is_finite()) {
            return Err(Error::Domain(format!("lambda must be finite and >= 0, got {}", self.lambda)));
        }
        let scale = self.omega.iter().fold(T::zero(), |m, x| m.max(x.abs()));
        for i in 0..v {
            for j in (i + 1)..v {
                if (self.omega[[i, j]] - self.omega[[j, i]]).abs() > T::lit(1e-12) * scale {
                    return Err(Error::Domain("Omega must be symmetric".into()));
                }
            }
        }
        cholesky(self.omega.view()).map_err(|_| Error::Conditioning("Omega is not positive definite".into()))?;
        Ok(())
    }
}

/// Minimizer of `(μ − X̄)ᵀ Σ⁻¹ (μ − X̄) + λ (Pμ − q)ᵀ Ω⁻¹ (Pμ − q)`.
///
/// Evaluated as `X̄ + Σ Pᵀ (P Σ Pᵀ + Ω/λ)⁻¹ (q − P X̄)`, which equals the
/// normal-equation form `(Σ⁻¹ + λPᵀΩ⁻¹P)⁻¹ (Σ⁻¹X̄ + λPᵀΩ⁻¹q)` but stays well
/// conditioned as `λ` grows. A singular `Σ` is an error even though this form
/// would not need its inverse.
pub fn black_litterman_mean<T: Scalar>(moments: &MomentEstimates<T>, views: &ViewSpec<T>) -> Result<Array1<T>> {
    let n = moments.mean.len();
    views.validate(n)?;
    let sigma = &moments.covariance;
    cholesky(sigma.view()).map_err(|e| Error::Conditioning(format!("covariance is not invertible: {e}")))?;
    if views.lambda == T::zero() {
        return Ok(moments.mean.clone());
    }
    let sp = sigma.dot(&views.p.t()); // N × V
    let system = views.p.dot(&sp) + views.omega.mapv(|w| w / views.lambda);
    let gap = &views.q - &views.p.dot(&moments.mean);
    let coeff = spd_solve(system.view(), gap.view())?;
    Ok(&moments.mean + &sp.dot(&coeff))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn moments() -> MomentEstimates<f64> {
        MomentEstimates {
            mean: array![0.01, 0.02, -0.005],
            covariance: array![[0.04, 0.01, 0.0], [0.01, 0.09, 0.02], [0.0, 0.02, 0.16]],
        }
    }

    #[test]
    fn zero_lambda_returns_sample_mean() {
        let m = moments();
        let v = ViewSpec { p: array![[1.0, -1.0, 0.0]], q: array![0.05], omega: array![[0.01]], lambda: 0.0 };
        assert_eq!(black_litterman_mean(&m, &v).unwrap(), m.mean);
    }

    #[test]
    fn consistent_views_leave_mean_unchanged() {
        let m = moments();
        for lambda in [0.1, 1.0, 1e6] {
            let v = ViewSpec { p: Array2::eye(3), q: m.mean.clone(), omega: Array2::eye(3) * 0.02, lambda };
            let mu = black_litterman_mean(&m, &v).unwrap();
            for (a, b) in mu.iter().zip(m.mean.iter()) {
                assert!((a - b).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn singular_covariance_is_conditioning_error() {
        let m = MomentEstimates { mean: array![0.0, 0.0], covariance: array![[1.0, 1.0], [1.0, 1.0]] };
        let v = ViewSpec { p: array![[1.0, 0.0]], q: array![0.1], omega: array![[1.0]], lambda: 1.0 };
        assert!(matches!(black_litterman_mean(&m, &v), Err(Error::Conditioning(_))));
    }

    #[test]
    fn bad_view_shapes() {
        let v = ViewSpec { p: array![[1.0, 0.0]], q: array![0.1], omega: array![[1.0]], lambda: 1.0 };
        assert!(matches!(black_litterman_mean(&moments(), &v), Err(Error::Shape(_))));
    }
}
