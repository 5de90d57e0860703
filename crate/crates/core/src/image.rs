//! Pixel-space helpers shared by ingestion and preview.

use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Bilinear resize of an `H×W×C` image with half-pixel centres
/// (`src = (dst + 0.5)·in/out − 0.5`), clamping at the borders.
pub fn resize_bilinear<T: Scalar>(
    image: &Tensor<T>,
    out_h: usize,
    out_w: usize,
) -> Result<Tensor<T>> {
    let (h, w, c) = image.hwc()?;
    if out_h == 0 || out_w == 0 {
        return Err(Error::InvalidArgument(
            "resize target must be positive".into(),
        ));
    }
    if (h, w) == (out_h, out_w) {
        return Ok(image.clone());
    }
    let taps = |out: usize, inp: usize| -> Vec<(usize, usize, f64)> {
        let scale = inp as f64 / out as f64;
        (0..out)
            .map(|o| {
                let s = ((o as f64 + 0.5) * scale - 0.5).max(0.0);
                let i0 = (s.floor() as usize).min(inp - 1);
                let i1 = (i0 + 1).min(inp - 1);
                (i0, i1, s - i0 as f64)
            })
            .collect()
    };
    let ys = taps(out_h, h);
    let xs = taps(out_w, w);
    let src = image.data();
    let px = |y: usize, x: usize, ch: usize| src[(y * w + x) * c + ch].as_f64();
    let mut out = Vec::with_capacity(out_h * out_w * c);
    for &(y0, y1, fy) in &ys {
        for &(x0, x1, fx) in &xs {
            for ch in 0..c {
                let top = px(y0, x0, ch) * (1.0 - fx) + px(y0, x1, ch) * fx;
                let bottom = px(y1, x0, ch) * (1.0 - fx) + px(y1, x1, ch) * fx;
                out.push(T::of_f64(top * (1.0 - fy) + bottom * fy));
            }
        }
    }
    Tensor::new([out_h, out_w, c], out)
}

/// Converts interleaved 8-bit RGB(A…) samples to `[0, 1]` values.
pub fn from_u8<T: Scalar>(h: usize, w: usize, c: usize, bytes: &[u8]) -> Result<Tensor<T>> {
    let inv = 1.0 / 255.0;
    Tensor::new(
        [h, w, c],
        bytes.iter().map(|&b| T::of_f64(b as f64 * inv)).collect(),
    )
}

/// Inverse of [`from_u8`], rounding and clamping to `0..=255`.
pub fn to_u8<T: Scalar>(image: &Tensor<T>) -> Vec<u8> {
    image
        .data()
        .iter()
        .map(|v| (v.as_f64() * 255.0).round().clamp(0.0, 255.0) as u8)
        .collect()
}
