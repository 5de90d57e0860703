use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Floor applied to probabilities before taking the log in the loss.
pub const LOG_CLIP: f64 = 1e-12;

/// Max-subtracted softmax over a 1-D tensor.
pub fn softmax<T: Scalar>(logits: &Tensor<T>) -> Result<Tensor<T>> {
    if logits.rank() != 1 || logits.is_empty() {
        return Err(Error::InvalidArgument(alloc::format!(
            "softmax expects a non-empty vector, got {:?}",
            logits.shape()
        )));
    }
    let max = logits
        .data()
        .iter()
        .copied()
        .fold(
            T::neg_infinity(),
            |m, z| if z > m || z.is_nan() { z } else { m },
        );
    let exps: Vec<T> = logits.data().iter().map(|&z| (z - max).exp()).collect();
    let sum: T = exps.iter().copied().sum();
    Tensor::new(
        logits.shape().to_vec(),
        exps.into_iter().map(|e| e / sum).collect(),
    )
}

/// Categorical cross-entropy `−Σ label·ln(max(p, LOG_CLIP))`.
pub fn cross_entropy<T: Scalar>(probs: &Tensor<T>, one_hot: &Tensor<T>) -> Result<T> {
    one_hot.expect_shape("cross_entropy labels", probs.shape())?;
    let clip = T::of_f64(LOG_CLIP);
    Ok(probs
        .data()
        .iter()
        .zip(one_hot.data())
        .filter(|(_, &y)| y != T::zero())
        .fold(T::zero(), |acc, (&p, &y)| {
            acc - y * if p < clip { clip } else { p }.ln()
        }))
}

/// Jacobian-vector product of softmax: `p ⊙ (g − ⟨g, p⟩)`.
pub fn softmax_backward<T: Scalar>(probs: &Tensor<T>, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
    grad_out.expect_shape("softmax grad_out", probs.shape())?;
    let dot: T = probs
        .data()
        .iter()
        .zip(grad_out.data())
        .map(|(&p, &g)| p * g)
        .sum();
    let mut out = probs.clone();
    for (o, &g) in out.data_mut().iter_mut().zip(grad_out.data()) {
        *o *= g - dot;
    }
    Ok(out)
}

/// Gradient of `cross_entropy(softmax(z), y)` with respect to `z`: `p − y`.
pub fn softmax_cross_entropy_backward<T: Scalar>(
    probs: &Tensor<T>,
    one_hot: &Tensor<T>,
) -> Result<Tensor<T>> {
    one_hot.expect_shape("cross_entropy labels", probs.shape())?;
    let mut g = probs.clone();
    for (gv, &y) in g.data_mut().iter_mut().zip(one_hot.data()) {
        *gv -= y;
    }
    Ok(g)
}

pub fn one_hot<T: Scalar>(label: usize, classes: usize) -> Tensor<T> {
    Tensor::from_fn([classes], |i| if i == label { T::one() } else { T::zero() })
}
