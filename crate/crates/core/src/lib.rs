//! Deep portfolio construction.
//!
//! The pipeline has four steps: auto-encode the market with a bottleneck
//! network ([`market_map`]), calibrate a portfolio-map network to a target
//! series ([`portfolio_map`]), validate both on held-out periods, and verify
//! by comparing efficient deep frontiers ([`frontier`]). Classic encoders
//! (sample moments, Black-Litterman ridge mean, sparse factor model) live in
//! [`baselines`].
//!
//! All numerical code is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases at the crate root fix the scalar to `f64`.

pub mod baselines;
pub mod data;
pub mod error;
pub mod frontier;
pub mod linalg;
pub mod market_map;
pub mod neural;
pub mod portfolio_map;
pub mod rng;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type ReturnsMatrix = data::ReturnsMatrix<f64>;
pub type Network = neural::Network<f64>;
pub type TrainConfig = neural::TrainConfig<f64>;
