use ndarray::{ArrayView2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::loss::{gradient, loss_parts, Penalty};
use super::network::Network;
use crate::error::{Error, Result};
use crate::rng::seeded;
use crate::scalar::Scalar;

/// Penalized SGD settings. `lambda` is the Lagrangian weight of the
/// weight-norm constraint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar", default)]
pub struct TrainConfig<T> {
    pub lambda: T,
    pub penalty: Penalty,
    pub learning_rate: T,
    pub epochs: usize,
    /// Mini-batch size; clamped to the number of training rows.
    pub batch_size: usize,
    pub seed: u64,
    /// Half-width of the uniform weight initialization. `None` uses
    /// `0.5 / √n_in` per layer.
    pub init_scale: Option<T>,
}

impl<T: Scalar> Default for TrainConfig<T> {
    fn default() -> Self {
        TrainConfig {
            lambda: T::zero(),
            penalty: Penalty::L2,
            learning_rate: T::lit(0.25),
            epochs: 300,
            batch_size: 16,
            seed: 0,
            init_scale: None,
        }
    }
}

impl<T: Scalar> TrainConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= T::zero() && self.lambda.is_finite()) {
            return Err(Error::Domain(format!("lambda must be finite and >= 0, got {}", self.lambda)));
        }
        // zero is allowed: it freezes the parameters
        if !(self.learning_rate >= T::zero() && self.learning_rate.is_finite()) {
            return Err(Error::Domain(format!("learning_rate must be finite and >= 0, got {}", self.learning_rate)));
        }
        if self.epochs == 0 {
            return Err(Error::Domain("epochs must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Domain("batch_size must be >= 1".into()));
        }
        if let Some(s) = self.init_scale {
            if !(s > T::zero() && s.is_finite()) {
                return Err(Error::Domain(format!("init_scale must be > 0, got {s}")));
            }
        }
        Ok(())
    }
}

/// Per-epoch objective on the full training set, measured after the epoch.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct LossTrace<T> {
    pub total: Vec<T>,
    pub fit: Vec<T>,
    pub penalty: Vec<T>,
}

impl<T: Scalar> LossTrace<T> {
    pub fn len(&self) -> usize {
        self.total.len()
    }

    pub fn is_empty(&self) -> bool {
        self.total.is_empty()
    }

    pub fn last_total(&self) -> Option<T> {
        self.total.last().copied()
    }
}

/// Trains a copy of `net` by mini-batch SGD.
///
/// Rows are reshuffled every epoch with a generator seeded from `cfg.seed`,
/// so the result is a pure function of the inputs.
pub fn train_sgd<T: Scalar>(
    net: &Network<T>,
    x: ArrayView2<T>,
    y: ArrayView2<T>,
    cfg: &TrainConfig<T>,
) -> Result<(Network<T>, LossTrace<T>)> {
    cfg.validate()?;
    // surfaces shape errors before any work
    loss_parts(net, x, y, cfg.lambda, cfg.penalty)?;

    let mut net = net.clone();
    let mut rng = seeded(cfg.seed);
    rng.set_stream(1);
    let rows = x.nrows();
    let batch = cfg.batch_size.min(rows);
    let mut order: Vec<usize> = (0..rows).collect();
    let mut trace = LossTrace::default();
    let lr = cfg.learning_rate;

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(batch) {
            let xb = x.select(Axis(0), chunk);
            let yb = y.select(Axis(0), chunk);
            let g = gradient(&net, xb.view(), yb.view(), cfg)?;
            for ((layer, gw), gb) in net.layers_mut().iter_mut().zip(&g.weights).zip(&g.biases) {
                layer.weights.zip_mut_with(gw, |w, &d| *w = *w - lr * d);
                layer.bias.zip_mut_with(gb, |b, &d| *b = *b - lr * d);
            }
        }
        let parts = loss_parts(&net, x, y, cfg.lambda, cfg.penalty)?;
        if !parts.total.is_finite() || !net.is_finite() {
            return Err(Error::Divergence { epoch, msg: format!("objective became {}", parts.total) });
        }
        trace.total.push(parts.total);
        trace.fit.push(parts.fit);
        trace.penalty.push(parts.penalty);
    }
    Ok((net, trace))
}
