use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Evaluates `(x₁ + (x₂ + … + (x_{n−1} + x_n⁺)⁺ … )⁺)⁺` innermost first.
///
/// The result equals the positive part of the largest prefix sum of `xs`,
/// which is how a stack of ReLU layers collapses to one max-sum payout.
pub fn nested_relu_chain<T: Scalar>(xs: &[T]) -> Result<T> {
    let (last, rest) =
        xs.split_last().ok_or_else(|| Error::Domain("nested_relu_chain needs at least one value".into()))?;
    let relu = |v: T| v.max(T::zero());
    Ok(rest.iter().rev().fold(relu(*last), |inner, &x| relu(x + inner)))
}
