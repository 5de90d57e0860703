//! Batch normalisation with fixed (inference-mode) statistics.
//!
//! Statistics are per channel over the trailing dimension. Only `gamma` and
//! `beta` receive gradients; the running statistics are constants.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub const DEFAULT_BN_EPS: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq)]
pub struct NormGrads<T> {
    pub input: Option<Tensor<T>>,
    pub gamma: Tensor<T>,
    pub beta: Tensor<T>,
}

/// Validates shapes and returns the per-channel `gamma / sqrt(var + eps)`.
fn affine<T: Scalar>(
    channels: usize,
    gamma: &Tensor<T>,
    beta: &Tensor<T>,
    mean: &Tensor<T>,
    var: &Tensor<T>,
    eps: f64,
) -> Result<Vec<T>> {
    for (t, op) in [
        (gamma, "batchnorm gamma"),
        (beta, "batchnorm beta"),
        (mean, "batchnorm mean"),
        (var, "batchnorm var"),
    ] {
        t.expect_shape(op, &[channels])?;
    }
    if let Some((channel, v)) = var.data().iter().enumerate().find(|(_, v)| **v < T::zero()) {
        return Err(Error::NegativeVariance {
            channel,
            value: v.as_f64(),
        });
    }
    let eps = T::of_f64(eps);
    Ok((0..channels)
        .map(|c| gamma.data()[c] / (var.data()[c] + eps).sqrt())
        .collect())
}

pub fn batchnorm_infer<T: Scalar>(
    input: &Tensor<T>,
    gamma: &Tensor<T>,
    beta: &Tensor<T>,
    running_mean: &Tensor<T>,
    running_var: &Tensor<T>,
    eps: f64,
) -> Result<Tensor<T>> {
    let c = input.channels();
    let scale = affine(c, gamma, beta, running_mean, running_var, eps)?;
    let mut out = input.clone();
    for px in out.data_mut().chunks_exact_mut(c) {
        for ch in 0..c {
            px[ch] = (px[ch] - running_mean.data()[ch]) * scale[ch] + beta.data()[ch];
        }
    }
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
pub fn batchnorm_backward<T: Scalar>(
    input: &Tensor<T>,
    gamma: &Tensor<T>,
    beta: &Tensor<T>,
    running_mean: &Tensor<T>,
    running_var: &Tensor<T>,
    eps: f64,
    grad_out: &Tensor<T>,
    need_input: bool,
) -> Result<NormGrads<T>> {
    let c = input.channels();
    let scale = affine(c, gamma, beta, running_mean, running_var, eps)?;
    grad_out.expect_shape("batchnorm grad_out", input.shape())?;
    let mut ggamma = vec![T::zero(); c];
    let mut gbeta = vec![T::zero(); c];
    let eps_t = T::of_f64(eps);
    let inv_std: Vec<T> = running_var
        .data()
        .iter()
        .map(|&v| T::one() / (v + eps_t).sqrt())
        .collect();
    for (px, g) in input
        .data()
        .chunks_exact(c)
        .zip(grad_out.data().chunks_exact(c))
    {
        for ch in 0..c {
            ggamma[ch] += g[ch] * (px[ch] - running_mean.data()[ch]) * inv_std[ch];
            gbeta[ch] += g[ch];
        }
    }
    let gx = need_input.then(|| {
        let mut gx = grad_out.clone();
        for px in gx.data_mut().chunks_exact_mut(c) {
            for ch in 0..c {
                px[ch] *= scale[ch];
            }
        }
        gx
    });
    Ok(NormGrads {
        input: gx,
        gamma: Tensor::new([c], ggamma)?,
        beta: Tensor::new([c], gbeta)?,
    })
}
