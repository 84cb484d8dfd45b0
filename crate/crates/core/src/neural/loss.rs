use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::network::Network;
use super::train::TrainConfig;
use crate::error::{shape_err, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Penalty {
    L1,
    L2,
}

impl std::str::FromStr for Penalty {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "l1" => Ok(Penalty::L1),
            "l2" => Ok(Penalty::L2),
            other => Err(format!("unknown penalty {other:?} (expected l1 or l2)")),
        }
    }
}

/// Objective split into its fit and penalty terms; `total = fit + penalty`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossParts<T> {
    pub total: T,
    pub fit: T,
    pub penalty: T,
}

/// Per-layer parameter gradients, shaped like the network's layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T: Scalar> {
    pub weights: Vec<Array2<T>>,
    pub biases: Vec<Array1<T>>,
}

impl<T: Scalar> Gradients<T> {
    pub fn max_abs(&self) -> T {
        self.weights
            .iter()
            .flat_map(|w| w.iter())
            .chain(self.biases.iter().flat_map(|b| b.iter()))
            .fold(T::zero(), |m, v| m.max(v.abs()))
    }
}

fn check_shapes<T: Scalar>(net: &Network<T>, x: &ArrayView2<T>, y: &ArrayView2<T>) -> Result<()> {
    if x.nrows() != y.nrows() {
        return shape_err(format!("{} input rows but {} target rows", x.nrows(), y.nrows()));
    }
    if x.nrows() == 0 {
        return shape_err("empty batch");
    }
    if x.ncols() != net.n_in() {
        return shape_err(format!("inputs have {} columns, network expects {}", x.ncols(), net.n_in()));
    }
    if y.ncols() != net.n_out() {
        return shape_err(format!("targets have {} columns, network produces {}", y.ncols(), net.n_out()));
    }
    Ok(())
}

/// Mean over rows of the squared residual norm, plus `λ·φ(W)`.
pub fn loss_parts<T: Scalar>(
    net: &Network<T>,
    x: ArrayView2<T>,
    y: ArrayView2<T>,
    lambda: T,
    penalty: Penalty,
) -> Result<LossParts<T>> {
    check_shapes(net, &x, &y)?;
    let out = net.forward_batch(x)?;
    let sq: T = out.iter().zip(y.iter()).map(|(&o, &t)| (o - t) * (o - t)).sum();
    let fit = sq / T::from_usize_lossy(x.nrows());
    let pen = if lambda == T::zero() { T::zero() } else { lambda * net.weight_penalty(penalty) };
    Ok(LossParts { total: fit + pen, fit, penalty: pen })
}

pub fn loss<T: Scalar>(
    net: &Network<T>,
    x: ArrayView2<T>,
    y: ArrayView2<T>,
    cfg: &TrainConfig<T>,
) -> Result<LossParts<T>> {
    loss_parts(net, x, y, cfg.lambda, cfg.penalty)
}

/// Reverse-mode gradient of [`loss`] with respect to every weight and bias.
pub fn gradient<T: Scalar>(
    net: &Network<T>,
    x: ArrayView2<T>,
    y: ArrayView2<T>,
    cfg: &TrainConfig<T>,
) -> Result<Gradients<T>> {
    check_shapes(net, &x, &y)?;
    let layers = net.layers();
    // pre-activations and activations per layer; acts[0] is the input
    let mut pre = Vec::with_capacity(layers.len());
    let mut acts = Vec::with_capacity(layers.len() + 1);
    acts.push(x.to_owned());
    for l in layers {
        let z = acts.last().unwrap().dot(&l.weights.t()) + &l.bias;
        acts.push(z.mapv(|v| l.activation.apply(v)));
        pre.push(z);
    }
    let scale = T::lit(2.0) / T::from_usize_lossy(x.nrows());
    let mut delta = (acts.last().unwrap() - &y).mapv(|v| v * scale);

    let mut wg = vec![Array2::zeros((0, 0)); layers.len()];
    let mut bg = vec![Array1::zeros(0); layers.len()];
    for (i, l) in layers.iter().enumerate().rev() {
        let act = l.activation;
        delta.zip_mut_with(&pre[i], |d, &z| *d = *d * act.derivative(z));
        let mut dw = delta.t().dot(&acts[i]);
        if cfg.lambda != T::zero() {
            let lam = cfg.lambda;
            dw.zip_mut_with(&l.weights, |g, &w| {
                *g = *g
                    + match cfg.penalty {
                        Penalty::L2 => T::lit(2.0) * lam * w,
                        // subgradient at zero is zero
                        Penalty::L1 => {
                            if w > T::zero() {
                                lam
                            } else if w < T::zero() {
                                -lam
                            } else {
                                T::zero()
                            }
                        }
                    }
            });
        }
        bg[i] = delta.sum_axis(Axis(0));
        wg[i] = dw;
        if i > 0 {
            delta = delta.dot(&l.weights);
        }
    }
    Ok(Gradients { weights: wg, biases: bg })
}
