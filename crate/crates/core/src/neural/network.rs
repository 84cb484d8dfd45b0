use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::activation::Activation;
use super::loss::Penalty;
use crate::error::{shape_err, Error, Result};
use crate::rng::seeded;
use crate::scalar::Scalar;

/// Version tag written into serialized networks.
pub const NETWORK_FORMAT_VERSION: &str = "dpt-net-1";

/// One semi-affine layer `activation(W x + b)`, with `W` of shape `n_out × n_in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer<T: Scalar> {
    pub weights: Array2<T>,
    pub bias: Array1<T>,
    pub activation: Activation,
}

impl<T: Scalar> Layer<T> {
    pub fn new(weights: Array2<T>, bias: Array1<T>, activation: Activation) -> Result<Self> {
        if weights.nrows() != bias.len() {
            return shape_err(format!("layer has {} weight rows but bias of length {}", weights.nrows(), bias.len()));
        }
        Ok(Layer { weights, bias, activation })
    }

    pub fn n_in(&self) -> usize {
        self.weights.ncols()
    }

    pub fn n_out(&self) -> usize {
        self.weights.nrows()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network<T: Scalar> {
    layers: Vec<Layer<T>>,
}

impl<T: Scalar> Network<T> {
    pub fn new(layers: Vec<Layer<T>>) -> Result<Self> {
        if layers.is_empty() {
            return shape_err("network needs at least one layer");
        }
        for (i, w) in layers.windows(2).enumerate() {
            if w[0].n_out() != w[1].n_in() {
                return shape_err(format!(
                    "layer {i} outputs {} values but layer {} expects {}",
                    w[0].n_out(),
                    i + 1,
                    w[1].n_in()
                ));
            }
        }
        for (i, l) in layers.iter().enumerate() {
            if l.bias.len() != l.n_out() {
                return shape_err(format!("layer {i}: bias length {} != {}", l.bias.len(), l.n_out()));
            }
            if !l.weights.iter().chain(l.bias.iter()).all(|v| v.is_finite()) {
                return Err(Error::Domain(format!("layer {i} has non-finite parameters")));
            }
        }
        Ok(Network { layers })
    }

    /// Randomly initialized network with the given layer widths.
    ///
    /// `widths` has one more entry than `activations`. Weights of layer `l`
    /// are drawn uniformly from `(−s, s)` with `s = init_scale` or, when
    /// `None`, `0.5 / √n_in`. Biases start at zero.
    pub fn random(widths: &[usize], activations: &[Activation], init_scale: Option<T>, seed: u64) -> Result<Self> {
        if widths.len() != activations.len() + 1 || activations.is_empty() {
            return shape_err(format!("{} widths do not match {} activations", widths.len(), activations.len()));
        }
        if widths.contains(&0) {
            return shape_err("layer widths must be positive");
        }
        if let Some(s) = init_scale {
            if !(s > T::zero() && s.is_finite()) {
                return Err(Error::Domain(format!("init_scale must be positive, got {s}")));
            }
        }
        let mut rng = seeded(seed);
        let layers = widths
            .windows(2)
            .zip(activations)
            .map(|(w, &act)| {
                let (n_in, n_out) = (w[0], w[1]);
                let scale = init_scale.map(|s| s.to_f64_lossy()).unwrap_or_else(|| 0.5 / (n_in as f64).sqrt());
                let weights = Array2::from_shape_simple_fn((n_out, n_in), || T::lit(rng.random_range(-scale..scale)));
                Layer { weights, bias: Array1::zeros(n_out), activation: act }
            })
            .collect();
        Network::new(layers)
    }

    pub fn layers(&self) -> &[Layer<T>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer<T>] {
        &mut self.layers
    }

    pub fn n_in(&self) -> usize {
        self.layers[0].n_in()
    }

    pub fn n_out(&self) -> usize {
        self.layers[self.layers.len() - 1].n_out()
    }

    /// Layer widths `[n_in, hidden..., n_out]`.
    pub fn widths(&self) -> Vec<usize> {
        std::iter::once(self.n_in()).chain(self.layers.iter().map(Layer::n_out)).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(|l| l.weights.iter().chain(l.bias.iter()).all(|v| v.is_finite()))
    }

    pub fn forward(&self, x: ArrayView1<T>) -> Result<Array1<T>> {
        if x.len() != self.n_in() {
            return shape_err(format!("input has length {}, network expects {}", x.len(), self.n_in()));
        }
        let mut a = x.to_owned();
        for l in &self.layers {
            let mut z = l.weights.dot(&a) + &l.bias;
            z.mapv_inplace(|v| l.activation.apply(v));
            a = z;
        }
        Ok(a)
    }

    /// Forward pass over a batch whose rows are samples.
    pub fn forward_batch(&self, x: ArrayView2<T>) -> Result<Array2<T>> {
        if x.ncols() != self.n_in() {
            return shape_err(format!("input has {} columns, network expects {}", x.ncols(), self.n_in()));
        }
        let mut a = x.to_owned();
        for l in &self.layers {
            let mut z = a.dot(&l.weights.t()) + &l.bias;
            z.mapv_inplace(|v| l.activation.apply(v));
            a = z;
        }
        Ok(a)
    }

    /// Weight penalty `φ(W)`: sum of squares (l2) or absolute values (l1)
    /// over all weight matrices. Biases are excluded.
    pub fn weight_penalty(&self, kind: Penalty) -> T {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter())
            .map(|&w| match kind {
                Penalty::L2 => w * w,
                Penalty::L1 => w.abs(),
            })
            .sum()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&NetworkDoc::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: NetworkDoc<T> = serde_json::from_str(text)?;
        doc.try_into()
    }
}

#[derive(Serialize, Deserialize)]
struct LayerDoc<T> {
    n_in: usize,
    n_out: usize,
    activation: Activation,
    /// Row-major `n_out × n_in`.
    weights: Vec<T>,
    bias: Vec<T>,
}

/// Serialized form of a [`Network`].
#[derive(Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub(crate) struct NetworkDoc<T> {
    version: String,
    layers: Vec<LayerDoc<T>>,
}

impl<T: Scalar> From<&Network<T>> for NetworkDoc<T> {
    fn from(net: &Network<T>) -> Self {
        NetworkDoc {
            version: NETWORK_FORMAT_VERSION.to_string(),
            layers: net
                .layers
                .iter()
                .map(|l| LayerDoc {
                    n_in: l.n_in(),
                    n_out: l.n_out(),
                    activation: l.activation,
                    weights: l.weights.iter().copied().collect(),
                    bias: l.bias.to_vec(),
                })
                .collect(),
        }
    }
}

impl<T: Scalar> TryFrom<NetworkDoc<T>> for Network<T> {
    type Error = Error;
    fn try_from(doc: NetworkDoc<T>) -> Result<Self> {
        if doc.version != NETWORK_FORMAT_VERSION {
            return Err(Error::Schema(format!(
                "unsupported network version {:?} (expected {NETWORK_FORMAT_VERSION:?})",
                doc.version
            )));
        }
        let layers = doc
            .layers
            .into_iter()
            .map(|l| {
                let w = Array2::from_shape_vec((l.n_out, l.n_in), l.weights)
                    .map_err(|e| Error::Shape(format!("weights: {e}")))?;
                Layer::new(w, Array1::from(l.bias), l.activation)
            })
            .collect::<Result<Vec<_>>>()?;
        Network::new(layers)
    }
}

impl<T: Scalar> Serialize for Network<T> {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        NetworkDoc::from(self).serialize(s)
    }
}

impl<'de, T: Scalar> Deserialize<'de> for Network<T> {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let doc = NetworkDoc::<T>::deserialize(d)?;
        Network::try_from(doc).map_err(serde::de::Error::custom)
    }
}
