//! Multi-input layers: elementwise residual add and channel concatenation.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub fn add<T: Scalar>(inputs: &[&Tensor<T>]) -> Result<Tensor<T>> {
    let (first, rest) = inputs
        .split_first()
        .ok_or_else(|| Error::InvalidArgument("add needs at least one input".into()))?;
    let mut out = (*first).clone();
    for t in rest {
        out.add_assign(t)?;
    }
    Ok(out)
}

/// Concatenates along the trailing dimension; leading dims must agree.
pub fn concat_channels<T: Scalar>(inputs: &[&Tensor<T>]) -> Result<Tensor<T>> {
    let first = inputs
        .first()
        .ok_or_else(|| Error::InvalidArgument("concat needs at least one input".into()))?;
    let lead = &first.shape()[..first.rank() - 1];
    for t in inputs {
        if &t.shape()[..t.rank() - 1] != lead {
            return Err(Error::shape("concat", first.shape(), t.shape()));
        }
    }
    let widths: Vec<usize> = inputs.iter().map(|t| t.channels()).collect();
    let total: usize = widths.iter().sum();
    let pixels = first.len() / widths[0];
    let mut data = Vec::with_capacity(pixels * total);
    for p in 0..pixels {
        for (t, &w) in inputs.iter().zip(&widths) {
            data.extend_from_slice(&t.data()[p * w..(p + 1) * w]);
        }
    }
    let mut shape = lead.to_vec();
    shape.push(total);
    Tensor::new(shape, data)
}

/// Splits the output gradient back into per-input gradients.
pub fn concat_channels_backward<T: Scalar>(
    input_shapes: &[&[usize]],
    grad_out: &Tensor<T>,
) -> Result<Vec<Tensor<T>>> {
    let widths: Vec<usize> = input_shapes
        .iter()
        .map(|s| *s.last().unwrap_or(&1))
        .collect();
    let total: usize = widths.iter().sum();
    if grad_out.channels() != total {
        return Err(Error::shape("concat grad_out", grad_out.shape(), &[total]));
    }
    let pixels = grad_out.len() / total;
    let mut parts: Vec<Vec<T>> = widths
        .iter()
        .map(|w| Vec::with_capacity(w * pixels))
        .collect();
    for px in grad_out.data().chunks_exact(total) {
        let mut off = 0;
        for (part, &w) in parts.iter_mut().zip(&widths) {
            part.extend_from_slice(&px[off..off + w]);
            off += w;
        }
    }
    parts
        .into_iter()
        .zip(input_shapes)
        .map(|(d, s)| Tensor::new(s.to_vec(), d))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn concat_interleaves_per_pixel() {
        let a = Tensor::<f64>::new([1, 2, 1], alloc::vec![1.0, 2.0]).unwrap();
        let b = Tensor::<f64>::new([1, 2, 2], alloc::vec![3.0, 4.0, 5.0, 6.0]).unwrap();
        let c = concat_channels(&[&a, &b]).unwrap();
        assert_eq!(c.shape(), &[1, 2, 3]);
        assert_eq!(c.data(), &[1.0, 3.0, 4.0, 2.0, 5.0, 6.0]);
        let parts = concat_channels_backward(&[a.shape(), b.shape()], &c).unwrap();
        assert_eq!(parts[0], a);
        assert_eq!(parts[1], b);
    }

    #[test]
    fn concat_rejects_spatial_mismatch() {
        let a = Tensor::<f64>::zeros([2, 2, 1]);
        let b = Tensor::<f64>::zeros([1, 2, 1]);
        assert!(concat_channels(&[&a, &b]).is_err());
        assert!(add(&[&a, &b]).is_err());
    }
}
