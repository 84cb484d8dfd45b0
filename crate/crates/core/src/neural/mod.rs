//! Feed-forward networks built from semi-affine layers `activation(W x + b)`.

mod activation;
mod arch;
mod loss;
mod maxsum;
mod network;
mod train;

pub use activation::{floored_relu, Activation};
pub use arch::MapConfig;
pub use loss::{gradient, loss, loss_parts, Gradients, LossParts, Penalty};
pub use maxsum::nested_relu_chain;
pub use network::{Layer, Network, NETWORK_FORMAT_VERSION};
pub use train::{train_sgd, LossTrace, TrainConfig};
