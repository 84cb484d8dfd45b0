use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use super::lasso::{lasso_with, LassoOptions};
use super::rows_of;
use crate::data::ReturnsMatrix;
use crate::error::{Error, Result};
use crate::linalg::{cholesky, cholesky_solve};
use crate::rng::seeded;
use crate::scalar::Scalar;

/// Sparse linear factor model `r_n ≈ Σ_k W_nk F_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorModel<T: Scalar> {
    /// `N × K` loadings (betas).
    pub loadings: Array2<T>,
    /// `K × T` factor series.
    pub factors: Array2<T>,
    pub lambda: T,
    /// Objective after each full loadings + factors iteration.
    pub objective_trace: Vec<T>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FactorOptions {
    pub max_iters: usize,
    /// Stop when the relative objective change falls below this.
    pub rel_tol: f64,
    pub lasso: LassoOptions,
}

impl Default for FactorOptions {
    fn default() -> Self {
        FactorOptions { max_iters: 200, rel_tol: 1e-8, lasso: LassoOptions::default() }
    }
}

#[derive(Serialize)]
struct FactorDoc<'a, T> {
    tickers: &'a [String],
    k: usize,
    lambda: T,
    loadings: Vec<Vec<T>>,
    factors: Vec<Vec<T>>,
    objective_trace: &'a [T],
}

impl<T: Scalar> FactorModel<T> {
    pub fn trace_is_non_increasing(&self, tol: T) -> bool {
        self.objective_trace.windows(2).all(|w| w[1] <= w[0] + tol)
    }

    pub fn to_json(&self, tickers: &[String]) -> Result<String> {
        let doc = FactorDoc {
            tickers,
            k: self.factors.nrows(),
            lambda: self.lambda,
            loadings: rows_of(&self.loadings),
            factors: rows_of(&self.factors),
            objective_trace: &self.objective_trace,
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }
}

/// `Σ_n ‖r_n − Σ_k W_nk F_k‖² + λ Σ |W_nk|` for a `T × N` panel.
pub fn factor_objective<T: Scalar>(returns: &Array2<T>, loadings: &Array2<T>, factors: &Array2<T>, lambda: T) -> T {
    let fit = factors.t().dot(&loadings.t());
    let sq: T = returns.iter().zip(fit.iter()).map(|(&r, &f)| (r - f) * (r - f)).sum();
    sq + lambda * loadings.iter().map(|w| w.abs()).sum::<T>()
}

/// Alternates a per-asset lasso for the loadings with an exact least-squares
/// update of the factors, starting from seeded Gaussian factors.
///
/// Factors whose loadings are all zero carry no information; their rows are
/// left untouched in the factor step.
pub fn factor_model_fit<T: Scalar>(
    data: &ReturnsMatrix<T>,
    k: usize,
    lambda: T,
    seed: u64,
    opts: FactorOptions,
) -> Result<FactorModel<T>> {
    let r = data.values().to_owned();
    let (t, n) = r.dim();
    if k == 0 || k > n.min(t) {
        return Err(Error::Domain(format!("K must be in 1..={}, got {k}", n.min(t))));
    }
    if !(lambda >= T::zero() && lambda.is_finite()) {
        return Err(Error::Domain(format!("lambda must be finite and >= 0, got {lambda}")));
    }
    if opts.max_iters == 0 {
        return Err(Error::Domain("max_iters must be >= 1".into()));
    }
    let mut rng = seeded(seed);
    let mut factors = Array2::from_shape_simple_fn((k, t), || T::lit(rng.sample(StandardNormal)));
    let mut loadings = Array2::<T>::zeros((n, k));
    let mut trace: Vec<T> = Vec::new();

    for iter in 0..opts.max_iters {
        // (a) loadings, one lasso per asset, warm-started
        let design = factors.t().to_owned();
        let rows = (0..n)
            .into_par_iter()
            .map(|a| lasso_with(design.view(), r.column(a), lambda, Some(loadings.row(a)), opts.lasso))
            .collect::<Result<Vec<Array1<T>>>>()
            .map_err(|e| e.context(format!("loadings step, iteration {}", iter + 1)))?;
        for (a, row) in rows.into_iter().enumerate() {
            loadings.row_mut(a).assign(&row);
        }

        // (b) factors, least squares per period over active factors
        let active: Vec<usize> = (0..k).filter(|&j| loadings.column(j).iter().any(|&w| w != T::zero())).collect();
        if !active.is_empty() {
            let wa = loadings.select(Axis(1), &active);
            let gram = wa.t().dot(&wa);
            let chol = cholesky(gram.view()).map_err(|_| {
                Error::Conditioning(format!("loadings Gram matrix is singular in factor step, iteration {}", iter + 1))
            })?;
            let rhs = wa.t().dot(&r.t()); // |active| × T
            for col in 0..t {
                let f = cholesky_solve(chol.view(), rhs.column(col));
                for (i, &j) in active.iter().enumerate() {
                    factors[[j, col]] = f[i];
                }
            }
        }

        let obj = factor_objective(&r, &loadings, &factors, lambda);
        if !obj.is_finite() {
            return Err(Error::Divergence { epoch: iter + 1, msg: "factor objective is not finite".into() });
        }
        let prev = trace.last().copied();
        trace.push(obj);
        if let Some(prev) = prev {
            let denom = prev.abs().max(T::min_positive_value());
            if (prev - obj).abs() / denom < T::lit(opts.rel_tol) {
                break;
            }
        }
    }
    Ok(FactorModel { loadings, factors, lambda, objective_trace: trace })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{synth_market, SynthSpec};

    #[test]
    fn huge_lambda_gives_zero_loadings() {
        let spec = SynthSpec { n_assets: 6, n_periods: 30, n_latent: 2, seed: 2, ..Default::default() };
        let m: ReturnsMatrix<f64> = synth_market(&spec).unwrap();
        let fit = factor_model_fit(&m, 2, 1e6, 1, FactorOptions::default()).unwrap();
        assert!(fit.loadings.iter().all(|&w| w == 0.0));
        let total: f64 = m.values().iter().map(|v| v * v).sum();
        assert!((fit.objective_trace.last().unwrap() - total).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_k() {
        let spec = SynthSpec { n_assets: 4, n_periods: 10, n_latent: 1, ..Default::default() };
        let m: ReturnsMatrix<f64> = synth_market(&spec).unwrap();
        assert!(matches!(factor_model_fit(&m, 5, 0.0, 0, FactorOptions::default()), Err(Error::Domain(_))));
    }
}
