//! Encoder/decoder split of the autoencoder objective with an explicit
//! latent matrix `Z`:
//!
//! `J(W₁, W₂, Z) = (1/T) [ ‖X − Z W₂ᵀ‖² + λ φ(Z) + ‖Z − f(X W₁ᵀ)‖² ]`
//!
//! The first two terms are the decoder, the last one the encoder. Training
//! alternates between a `Z` block and a `(W₁, W₂)` block.

use ndarray::{concatenate, Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::{lasso_with, LassoOptions};
use crate::data::ReturnsMatrix;
use crate::error::{Error, Result};
use crate::linalg::{cholesky, cholesky_solve, pinv_lstsq, sym_eigen};
use crate::neural::{Activation, Layer, Network, Penalty};
use crate::rng::seeded;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar", rename_all = "snake_case", tag = "kind")]
pub enum InnerSolver<T> {
    /// Exact block minimization. The weight block needs a linear encoder.
    Exact,
    /// A fixed number of gradient steps per block. Each step is
    /// `learning_rate / L`, with `L` the Lipschitz constant of the block
    /// gradient, so any rate in `(0, 1]` descends on quadratic blocks
    /// whatever the units of `X`. Rows of `Z` are decoupled, so the latent
    /// step follows each row's own gradient (`T·∂J/∂Z`).
    Gradient { steps: usize, learning_rate: T },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct AlternatingConfig<T> {
    pub hidden_width: usize,
    /// Encoder activation `f`.
    pub activation: Activation,
    pub lambda: T,
    pub penalty: Penalty,
    pub outer_iters: usize,
    pub inner: InnerSolver<T>,
    pub seed: u64,
    pub init_scale: Option<T>,
}

impl<T: Scalar> Default for AlternatingConfig<T> {
    fn default() -> Self {
        AlternatingConfig {
            hidden_width: 5,
            activation: Activation::Linear,
            lambda: T::zero(),
            penalty: Penalty::L2,
            outer_iters: 100,
            inner: InnerSolver::Gradient { steps: 5, learning_rate: T::one() },
            seed: 0,
            init_scale: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AlternatingFit<T: Scalar> {
    /// Encoder `f(W₁ x)` followed by the linear decoder `W₂ z`, no biases.
    pub network: Network<T>,
    /// `T × K` latent factors.
    pub latent: Array2<T>,
    /// Objective after each outer iteration.
    pub objective_trace: Vec<T>,
}

fn phi<T: Scalar>(z: &Array2<T>, kind: Penalty) -> T {
    z.iter()
        .map(|&v| match kind {
            Penalty::L2 => v * v,
            Penalty::L1 => v.abs(),
        })
        .sum()
}

fn encode<T: Scalar>(x: ArrayView2<T>, w1: &Array2<T>, f: Activation) -> (Array2<T>, Array2<T>) {
    let pre = x.dot(&w1.t());
    let enc = pre.mapv(|v| f.apply(v));
    (pre, enc)
}

/// Evaluates `J` for explicit blocks.
pub fn alternating_objective<T: Scalar>(
    x: ArrayView2<T>,
    w1: &Array2<T>,
    w2: &Array2<T>,
    z: &Array2<T>,
    activation: Activation,
    lambda: T,
    penalty: Penalty,
) -> T {
    let (_, enc) = encode(x, w1, activation);
    let dec = &x - &z.dot(&w2.t());
    let gap = z - &enc;
    let sq = |m: &Array2<T>| m.iter().map(|&v| v * v).sum::<T>();
    (sq(&dec) + lambda * phi(z, penalty) + sq(&gap)) / T::from_usize_lossy(x.nrows())
}

fn uniform<T: Scalar>(rows: usize, cols: usize, scale: Option<T>, fan_in: usize, rng: &mut impl Rng) -> Array2<T> {
    let s = scale.map(|s| s.to_f64_lossy()).unwrap_or_else(|| 0.5 / (fan_in as f64).sqrt());
    Array2::from_shape_simple_fn((rows, cols), || T::lit(rng.random_range(-s..s)))
}

fn largest_eigenvalue<T: Scalar>(gram: &Array2<T>) -> Result<T> {
    let (vals, _) = sym_eigen(gram.view())?;
    Ok(vals.iter().copied().fold(T::zero(), T::max))
}

// step = rate / L, or no step when the block is flat
fn scaled<T: Scalar>(rate: T, lipschitz: T) -> T {
    if lipschitz > T::zero() {
        rate / lipschitz
    } else {
        T::zero()
    }
}

fn exact_latent_step<T: Scalar>(
    x: ArrayView2<T>,
    w2: &Array2<T>,
    enc: &Array2<T>,
    z: &mut Array2<T>,
    lambda: T,
    penalty: Penalty,
) -> Result<()> {
    let k = w2.ncols();
    match penalty {
        Penalty::L2 => {
            // (W₂ᵀW₂ + (1+λ) I) z_t = W₂ᵀ x_t + e_t
            let a = w2.t().dot(w2) + Array2::<T>::eye(k) * (T::one() + lambda);
            let chol = cholesky(a.view())?;
            let rhs = x.dot(w2) + enc;
            for (mut zt, bt) in z.outer_iter_mut().zip(rhs.outer_iter()) {
                zt.assign(&cholesky_solve(chol.view(), bt));
            }
        }
        Penalty::L1 => {
            // lasso on the stacked system [W₂; I] z_t ≈ [x_t; e_t]
            let design = concatenate(Axis(0), &[w2.view(), Array2::<T>::eye(k).view()])
                .map_err(|e| Error::Shape(e.to_string()))?;
            for t in 0..z.nrows() {
                let resp: Array1<T> = x.row(t).iter().chain(enc.row(t).iter()).copied().collect();
                let warm = z.row(t).to_owned();
                let zt = lasso_with(design.view(), resp.view(), lambda, Some(warm.view()), LassoOptions::default())?;
                z.row_mut(t).assign(&zt);
            }
        }
    }
    Ok(())
}

/// Alternating minimization of the split autoencoder objective.
///
/// Each outer iteration (a) updates `Z` with the weights fixed, then (b)
/// updates `W₁` and `W₂` with `Z` fixed. With [`InnerSolver::Exact`] both
/// blocks are solved exactly, so the recorded objective is non-increasing.
pub fn train_autoencoder_alternating<T: Scalar>(
    x: &ReturnsMatrix<T>,
    cfg: &AlternatingConfig<T>,
) -> Result<AlternatingFit<T>> {
    let xv = x.values();
    let (t, n) = xv.dim();
    let k = cfg.hidden_width;
    if k == 0 {
        return Err(Error::Domain("hidden_width must be >= 1".into()));
    }
    if !(cfg.lambda >= T::zero() && cfg.lambda.is_finite()) {
        return Err(Error::Domain(format!("lambda must be finite and >= 0, got {}", cfg.lambda)));
    }
    if cfg.outer_iters == 0 {
        return Err(Error::Domain("outer_iters must be >= 1".into()));
    }
    if matches!(cfg.inner, InnerSolver::Exact) && cfg.activation != Activation::Linear {
        return Err(Error::Domain("exact inner steps require a linear encoder activation".into()));
    }
    let f = cfg.activation;
    let mut rng = seeded(cfg.seed);
    let mut w1: Array2<T> = uniform(k, n, cfg.init_scale, n, &mut rng);
    let mut w2: Array2<T> = uniform(n, k, cfg.init_scale, k, &mut rng);
    let mut z = encode(xv, &w1, f).1;
    let tn = T::from_usize_lossy(t);
    let two = T::lit(2.0);
    let mut trace = Vec::with_capacity(cfg.outer_iters);
    let pinv_tol = T::lit(1e-12).max(T::epsilon() * T::lit(100.0));
    // the encoder gradient is bounded by the linear one since |f'| ≤ 1
    let l_w1 = match cfg.inner {
        InnerSolver::Gradient { .. } => two * largest_eigenvalue(&xv.t().dot(&xv))? / tn,
        InnerSolver::Exact => T::zero(),
    };

    for iter in 1..=cfg.outer_iters {
        // (a) latent block
        let (_, enc) = encode(xv, &w1, f);
        match cfg.inner {
            InnerSolver::Exact => exact_latent_step(xv, &w2, &enc, &mut z, cfg.lambda, cfg.penalty)?,
            InnerSolver::Gradient { steps, learning_rate } => {
                let mut l_z = two * (largest_eigenvalue(&w2.t().dot(&w2))? + T::one());
                if cfg.penalty == Penalty::L2 {
                    l_z = l_z + two * cfg.lambda;
                }
                let eta = scaled(learning_rate, l_z);
                for _ in 0..steps {
                    let dec = &xv - &z.dot(&w2.t());
                    let mut g = dec.dot(&w2) * (-two) + (&z - &enc) * two;
                    if cfg.lambda != T::zero() {
                        g.zip_mut_with(&z, |gi, &zi| {
                            let d = match cfg.penalty {
                                Penalty::L2 => two * zi,
                                Penalty::L1 => {
                                    if zi > T::zero() {
                                        T::one()
                                    } else if zi < T::zero() {
                                        -T::one()
                                    } else {
                                        T::zero()
                                    }
                                }
                            };
                            *gi = *gi + cfg.lambda * d;
                        });
                    }
                    z.zip_mut_with(&g, |zi, &gi| *zi = *zi - eta * gi);
                }
            }
        }

        // (b) weight block
        match cfg.inner {
            InnerSolver::Exact => {
                w2 = pinv_lstsq(z.view(), xv, pinv_tol)?.reversed_axes();
                w1 = pinv_lstsq(xv, z.view(), pinv_tol)?.reversed_axes();
            }
            InnerSolver::Gradient { steps, learning_rate } => {
                let eta2 = scaled(learning_rate, two * largest_eigenvalue(&z.t().dot(&z))? / tn);
                let eta1 = scaled(learning_rate, l_w1);
                for _ in 0..steps {
                    let dec = &xv - &z.dot(&w2.t());
                    let g2 = dec.t().dot(&z) * (-two) / tn;
                    let (pre, enc) = encode(xv, &w1, f);
                    let mut d = (&enc - &z) * two / tn;
                    d.zip_mut_with(&pre, |di, &p| *di = *di * f.derivative(p));
                    let g1 = d.t().dot(&xv);
                    w2.zip_mut_with(&g2, |w, &g| *w = *w - eta2 * g);
                    w1.zip_mut_with(&g1, |w, &g| *w = *w - eta1 * g);
                }
            }
        }

        let obj = alternating_objective(xv, &w1, &w2, &z, f, cfg.lambda, cfg.penalty);
        if !obj.is_finite() {
            return Err(Error::Divergence { epoch: iter, msg: format!("objective became {obj}") });
        }
        trace.push(obj);
    }

    let network = Network::new(vec![
        Layer::new(w1, Array1::zeros(k), f)?,
        Layer::new(w2, Array1::zeros(n), Activation::Linear)?,
    ])?;
    Ok(AlternatingFit { network, latent: z, objective_trace: trace })
}
