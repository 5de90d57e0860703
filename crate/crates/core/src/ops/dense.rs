use alloc::vec;

use super::conv::KernelGrads;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

fn dims<T: Scalar>(input: &Tensor<T>, weights: &Tensor<T>) -> Result<(usize, usize)> {
    match (input.shape(), weights.shape()) {
        ([n], [wn, m]) if n == wn => Ok((*n, *m)),
        (i, w) => Err(Error::shape("dense", i, w)),
    }
}

/// `out = inputᵀ · weights + bias` for an `N` vector and `N×M` weights.
pub fn dense<T: Scalar>(
    input: &Tensor<T>,
    weights: &Tensor<T>,
    bias: &Tensor<T>,
) -> Result<Tensor<T>> {
    let (n, m) = dims(input, weights)?;
    bias.expect_shape("dense bias", &[m])?;
    let mut out = bias.data().to_vec();
    let w = weights.data();
    for (i, &x) in input.data().iter().enumerate().take(n) {
        if x == T::zero() {
            continue;
        }
        for (o, &wv) in out.iter_mut().zip(&w[i * m..(i + 1) * m]) {
            *o += x * wv;
        }
    }
    Tensor::new([m], out)
}

pub fn dense_backward<T: Scalar>(
    input: &Tensor<T>,
    weights: &Tensor<T>,
    grad_out: &Tensor<T>,
    need_input: bool,
) -> Result<KernelGrads<T>> {
    let (n, m) = dims(input, weights)?;
    grad_out.expect_shape("dense grad_out", &[m])?;
    let g = grad_out.data();
    let w = weights.data();
    let mut gw = vec![T::zero(); n * m];
    for (i, &x) in input.data().iter().enumerate() {
        for (gv, &go) in gw[i * m..(i + 1) * m].iter_mut().zip(g) {
            *gv = x * go;
        }
    }
    let gx = need_input.then(|| {
        Tensor::from_fn([n], |i| {
            w[i * m..(i + 1) * m]
                .iter()
                .zip(g)
                .fold(T::zero(), |acc, (&wv, &go)| acc + wv * go)
        })
    });
    Ok(KernelGrads {
        input: gx,
        kernel: Tensor::new([n, m], gw)?,
        bias: grad_out.clone(),
    })
}
