//! Classic encoders the deep pipeline is compared against.

mod black_litterman;
mod factor;
mod lasso;
mod moments;

pub use black_litterman::{black_litterman_mean, ViewDoc, ViewSpec};
pub use factor::{factor_model_fit, factor_objective, FactorModel, FactorOptions};
pub use lasso::{lasso, lasso_with, soft_threshold, LassoOptions};
pub use moments::{markowitz_moments, MomentEstimates};

use ndarray::Array2;

use crate::scalar::Scalar;

pub(crate) fn rows_of<T: Scalar>(m: &Array2<T>) -> Vec<Vec<T>> {
    m.outer_iter().map(|r| r.to_vec()).collect()
}
