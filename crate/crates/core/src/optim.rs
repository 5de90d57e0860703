//! Adam with bias correction.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::model::Gradients;
use crate::params::ParamStore;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-7,
        }
    }
}

/// First/second moment estimates aligned with a [`ParamStore`].
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState<T> {
    pub config: AdamConfig,
    pub m: Vec<Tensor<T>>,
    pub v: Vec<Tensor<T>>,
    pub t: u64,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(params: &ParamStore<T>, config: AdamConfig) -> Self {
        let zeros: Vec<Tensor<T>> = params
            .entries()
            .iter()
            .map(|e| Tensor::zeros(e.tensor.shape().to_vec()))
            .collect();
        Self {
            config,
            m: zeros.clone(),
            v: zeros,
            t: 0,
        }
    }

    /// One update. Frozen and non-trainable parameters (and their moments)
    /// are left untouched; a missing gradient counts as zero.
    pub fn step(
        &mut self,
        params: &mut ParamStore<T>,
        grads: &Gradients<T>,
        lr: f64,
    ) -> Result<()> {
        if grads.grads.len() != params.len() || self.m.len() != params.len() {
            return Err(Error::ParamMismatch(
                "gradients/optimizer state do not match the parameter store".into(),
            ));
        }
        self.t += 1;
        let AdamConfig { beta1, beta2, eps } = self.config;
        let t = self.t as i32;
        let c1 = T::of_f64(1.0 - num_traits::Float::powi(beta1, t));
        let c2 = T::of_f64(1.0 - num_traits::Float::powi(beta2, t));
        let (b1, b2) = (T::of_f64(beta1), T::of_f64(beta2));
        let (lr, eps) = (T::of_f64(lr), T::of_f64(eps));
        for i in 0..params.len() {
            if !params.is_updatable(i) {
                continue;
            }
            let g = grads.grads[i].as_ref();
            if let Some(g) = g {
                g.expect_shape("adam gradient", params.entries()[i].tensor.shape())?;
            }
            let m = self.m[i].data_mut();
            let v = self.v[i].data_mut();
            let p = params.tensor_mut(i).data_mut();
            for k in 0..p.len() {
                let gk = g.map_or(T::zero(), |g| g.data()[k]);
                m[k] = b1 * m[k] + (T::one() - b1) * gk;
                v[k] = b2 * v[k] + (T::one() - b2) * gk * gk;
                let m_hat = m[k] / c1;
                let v_hat = v[k] / c2;
                p[k] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

/// Functional form of [`AdamState::step`].
pub fn adam_step<T: Scalar>(
    mut params: ParamStore<T>,
    grads: &Gradients<T>,
    mut state: AdamState<T>,
    lr: f64,
) -> Result<(ParamStore<T>, AdamState<T>)> {
    state.step(&mut params, grads, lr)?;
    Ok((params, state))
}
