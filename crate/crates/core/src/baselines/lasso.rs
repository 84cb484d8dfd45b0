use ndarray::{Array1, ArrayView1, ArrayView2};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LassoOptions {
    /// Stop once no coordinate moves by more than this in a sweep.
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for LassoOptions {
    fn default() -> Self {
        LassoOptions { tol: 1e-10, max_sweeps: 10_000 }
    }
}

/// `sign(z) · max(|z| − γ, 0)`.
#[inline]
pub fn soft_threshold<T: Scalar>(z: T, gamma: T) -> T {
    if z > gamma {
        z - gamma
    } else if z < -gamma {
        z + gamma
    } else {
        T::zero()
    }
}

/// Minimizer of `‖response − design·w‖² + λ‖w‖₁` by cyclic coordinate descent.
pub fn lasso<T: Scalar>(design: ArrayView2<T>, response: ArrayView1<T>, lambda: T) -> Result<Array1<T>> {
    lasso_with(design, response, lambda, None, LassoOptions::default())
}

/// [`lasso`] with a warm start and explicit stopping rule.
///
/// Every coordinate update is an exact one-dimensional minimization, so the
/// objective never increases from the starting point.
pub fn lasso_with<T: Scalar>(
    design: ArrayView2<T>,
    response: ArrayView1<T>,
    lambda: T,
    warm_start: Option<ArrayView1<T>>,
    opts: LassoOptions,
) -> Result<Array1<T>> {
    let (m, k) = design.dim();
    if response.len() != m {
        return Err(Error::Shape(format!("design has {m} rows, response has {}", response.len())));
    }
    if !(lambda >= T::zero() && lambda.is_finite()) {
        return Err(Error::Domain(format!("lambda must be finite and >= 0, got {lambda}")));
    }
    if !design.iter().chain(response.iter()).all(|v| v.is_finite()) {
        return Err(Error::Domain("lasso inputs must be finite".into()));
    }
    let mut w = match warm_start {
        Some(w0) if w0.len() == k => w0.to_owned(),
        Some(w0) => return Err(Error::Shape(format!("warm start has length {}, expected {k}", w0.len()))),
        None => Array1::zeros(k),
    };
    let col_sq: Vec<T> = design.columns().into_iter().map(|c| c.dot(&c)).collect();
    let mut resid = &response - &design.dot(&w);
    let half = lambda / T::lit(2.0);
    let tol = T::lit(opts.tol);

    let mut last = T::infinity();
    for _ in 0..opts.max_sweeps {
        let mut max_delta = T::zero();
        for j in 0..k {
            let old = w[j];
            let new = if col_sq[j] == T::zero() {
                T::zero()
            } else {
                let col = design.column(j);
                let rho = col.dot(&resid) + col_sq[j] * old;
                soft_threshold(rho, half) / col_sq[j]
            };
            if new != old {
                let step = new - old;
                resid.zip_mut_with(&design.column(j), |r, &d| *r = *r - d * step);
                w[j] = new;
                max_delta = max_delta.max(step.abs());
            }
        }
        last = max_delta;
        if max_delta < tol {
            return Ok(w);
        }
    }
    Err(Error::IterationLimit { iterations: opts.max_sweeps, last_delta: last.to_f64_lossy() })
}
