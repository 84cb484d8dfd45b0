use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use super::activation::Activation;
use super::network::Network;
use super::train::{train_sgd, LossTrace, TrainConfig};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Architecture plus training settings for a market-map or portfolio-map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar", default)]
pub struct MapConfig<T> {
    /// Hidden layer widths; the default is a single layer of five units.
    pub hidden: Vec<usize>,
    pub hidden_activation: Activation,
    pub output_activation: Activation,
    pub train: TrainConfig<T>,
}

impl<T: Scalar> Default for MapConfig<T> {
    fn default() -> Self {
        MapConfig {
            hidden: vec![5],
            hidden_activation: Activation::Relu,
            output_activation: Activation::Linear,
            train: TrainConfig::default(),
        }
    }
}

impl<T: Scalar> MapConfig<T> {
    pub fn widths(&self, n_in: usize, n_out: usize) -> Vec<usize> {
        std::iter::once(n_in).chain(self.hidden.iter().copied()).chain(std::iter::once(n_out)).collect()
    }

    pub fn activations(&self) -> Vec<Activation> {
        let mut acts = vec![self.hidden_activation; self.hidden.len()];
        acts.push(self.output_activation);
        acts
    }

    /// True when every layer is linear, so the map is affine.
    pub fn is_linear(&self) -> bool {
        self.output_activation == Activation::Linear
            && (self.hidden.is_empty() || self.hidden_activation == Activation::Linear)
    }

    pub fn init_network(&self, n_in: usize, n_out: usize) -> Result<Network<T>> {
        if self.hidden.contains(&0) {
            return Err(Error::Domain("hidden widths must be >= 1".into()));
        }
        Network::random(&self.widths(n_in, n_out), &self.activations(), self.train.init_scale, self.train.seed)
    }

    /// Seeded initialization followed by SGD.
    pub fn fit(&self, x: ArrayView2<T>, y: ArrayView2<T>) -> Result<(Network<T>, LossTrace<T>)> {
        let init = self.init_network(x.ncols(), y.ncols())?;
        train_sgd(&init, x, y, &self.train)
    }
}
