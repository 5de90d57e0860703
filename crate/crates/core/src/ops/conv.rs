//! Standard, depthwise and pointwise 2-D convolution over `H×W×C` tensors.
//!
//! Kernels are laid out `Kh×Kw×Cin×Cout` (standard), `Kh×Kw×C` (depthwise)
//! and `Cin×Cout` (pointwise). The standard convolution runs through a
//! patch matrix (im2col) and a row-major GEMM; [`conv2d_direct`] is the
//! straightforward loop nest over the same geometry.

use alloc::vec;
use alloc::vec::Vec;

use super::gemm::{gemm, gemm_a_bt, gemm_at_b};
use super::geometry::ConvGeometry;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Gradients of a layer with a weight tensor and a bias vector.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelGrads<T> {
    /// `None` when the caller did not ask for the input gradient.
    pub input: Option<Tensor<T>>,
    pub kernel: Tensor<T>,
    pub bias: Tensor<T>,
}

struct Plan {
    h: usize,
    w: usize,
    cin: usize,
    cout: usize,
    oh: usize,
    ow: usize,
    pad_top: usize,
    pad_left: usize,
    geom: ConvGeometry,
}

impl Plan {
    /// Source coordinate for output row/column `o` and kernel tap `d`.
    #[inline]
    fn src(o: usize, d: usize, stride: usize, pad: usize, limit: usize) -> Option<usize> {
        let pos = (o * stride + d).checked_sub(pad)?;
        (pos < limit).then_some(pos)
    }
}

fn plan_conv<T: Scalar>(
    input: &Tensor<T>,
    kernel: &Tensor<T>,
    bias: &Tensor<T>,
    geom: &ConvGeometry,
) -> Result<Plan> {
    let (h, w, cin) = input.hwc()?;
    let mismatch = || Error::shape("conv2d input/kernel", input.shape(), kernel.shape());
    let [kh, kw, kc, cout] = kernel.shape()[..] else {
        return Err(mismatch());
    };
    if kh != geom.kernel_h || kw != geom.kernel_w || kc != cin {
        return Err(mismatch());
    }
    bias.expect_shape("conv2d bias", &[cout])?;
    let (oh, ow, pad_top, pad_left) = geom.output(h, w)?;
    Ok(Plan {
        h,
        w,
        cin,
        cout,
        oh,
        ow,
        pad_top,
        pad_left,
        geom: *geom,
    })
}

fn im2col<T: Scalar>(x: &[T], p: &Plan) -> Vec<T> {
    let (kh, kw, s) = (p.geom.kernel_h, p.geom.kernel_w, p.geom.stride);
    let k = kh * kw * p.cin;
    let mut col = vec![T::zero(); p.oh * p.ow * k];
    for oy in 0..p.oh {
        for ox in 0..p.ow {
            let row = &mut col[(oy * p.ow + ox) * k..(oy * p.ow + ox + 1) * k];
            for dy in 0..kh {
                let Some(iy) = Plan::src(oy, dy, s, p.pad_top, p.h) else {
                    continue;
                };
                for dx in 0..kw {
                    let Some(ix) = Plan::src(ox, dx, s, p.pad_left, p.w) else {
                        continue;
                    };
                    let dst = (dy * kw + dx) * p.cin;
                    let src = (iy * p.w + ix) * p.cin;
                    row[dst..dst + p.cin].copy_from_slice(&x[src..src + p.cin]);
                }
            }
        }
    }
    col
}

fn col2im<T: Scalar>(col: &[T], p: &Plan) -> Vec<T> {
    let (kh, kw, s) = (p.geom.kernel_h, p.geom.kernel_w, p.geom.stride);
    let k = kh * kw * p.cin;
    let mut x = vec![T::zero(); p.h * p.w * p.cin];
    for oy in 0..p.oh {
        for ox in 0..p.ow {
            let row = &col[(oy * p.ow + ox) * k..(oy * p.ow + ox + 1) * k];
            for dy in 0..kh {
                let Some(iy) = Plan::src(oy, dy, s, p.pad_top, p.h) else {
                    continue;
                };
                for dx in 0..kw {
                    let Some(ix) = Plan::src(ox, dx, s, p.pad_left, p.w) else {
                        continue;
                    };
                    let src = (dy * kw + dx) * p.cin;
                    let dst = (iy * p.w + ix) * p.cin;
                    for (a, &b) in x[dst..dst + p.cin].iter_mut().zip(&row[src..src + p.cin]) {
                        *a += b;
                    }
                }
            }
        }
    }
    x
}

fn add_bias_rows<T: Scalar>(out: &mut [T], bias: &[T]) {
    for row in out.chunks_exact_mut(bias.len()) {
        for (o, &b) in row.iter_mut().zip(bias) {
            *o += b;
        }
    }
}

fn sum_rows<T: Scalar>(rows: &[T], width: usize) -> Vec<T> {
    let mut acc = vec![T::zero(); width];
    for row in rows.chunks_exact(width) {
        for (a, &v) in acc.iter_mut().zip(row) {
            *a += v;
        }
    }
    acc
}

/// Standard convolution through im2col + GEMM.
pub fn conv2d<T: Scalar>(
    input: &Tensor<T>,
    kernel: &Tensor<T>,
    bias: &Tensor<T>,
    geom: &ConvGeometry,
) -> Result<Tensor<T>> {
    let p = plan_conv(input, kernel, bias, geom)?;
    let k = p.geom.kernel_h * p.geom.kernel_w * p.cin;
    let rows = p.oh * p.ow;
    let mut out = vec![T::zero(); rows * p.cout];
    if k == p.cin && p.geom.stride == 1 && p.oh == p.h && p.ow == p.w {
        // 1×1, stride 1: the patch matrix is the input itself.
        gemm(input.data(), kernel.data(), &mut out, rows, k, p.cout);
    } else {
        let col = im2col(input.data(), &p);
        gemm(&col, kernel.data(), &mut out, rows, k, p.cout);
    }
    add_bias_rows(&mut out, bias.data());
    Tensor::new([p.oh, p.ow, p.cout], out)
}

/// Standard convolution as a direct loop nest (no patch matrix).
pub fn conv2d_direct<T: Scalar>(
    input: &Tensor<T>,
    kernel: &Tensor<T>,
    bias: &Tensor<T>,
    geom: &ConvGeometry,
) -> Result<Tensor<T>> {
    let p = plan_conv(input, kernel, bias, geom)?;
    let (kh, kw, s) = (p.geom.kernel_h, p.geom.kernel_w, p.geom.stride);
    let x = input.data();
    let kd = kernel.data();
    let mut out = Tensor::zeros([p.oh, p.ow, p.cout]);
    let o = out.data_mut();
    for oy in 0..p.oh {
        for ox in 0..p.ow {
            for co in 0..p.cout {
                let mut acc = bias.data()[co];
                for dy in 0..kh {
                    let Some(iy) = Plan::src(oy, dy, s, p.pad_top, p.h) else {
                        continue;
                    };
                    for dx in 0..kw {
                        let Some(ix) = Plan::src(ox, dx, s, p.pad_left, p.w) else {
                            continue;
                        };
                        for ci in 0..p.cin {
                            acc += x[(iy * p.w + ix) * p.cin + ci]
                                * kd[((dy * kw + dx) * p.cin + ci) * p.cout + co];
                        }
                    }
                }
                o[(oy * p.ow + ox) * p.cout + co] = acc;
            }
        }
    }
    Ok(out)
}

pub fn conv2d_backward<T: Scalar>(
    input: &Tensor<T>,
    kernel: &Tensor<T>,
    grad_out: &Tensor<T>,
    geom: &ConvGeometry,
    need_input: bool,
) -> Result<KernelGrads<T>> {
    let cout = kernel.shape().last().copied().unwrap_or(0);
    let bias = Tensor::zeros([cout.max(1)]);
    let p = plan_conv(input, kernel, &bias, geom)?;
    grad_out.expect_shape("conv2d grad_out", &[p.oh, p.ow, p.cout])?;
    let k = p.geom.kernel_h * p.geom.kernel_w * p.cin;
    let rows = p.oh * p.ow;
    let col = im2col(input.data(), &p);
    let mut gk = vec![T::zero(); k * p.cout];
    gemm_at_b(&col, grad_out.data(), &mut gk, rows, k, p.cout);
    let gb = sum_rows(grad_out.data(), p.cout);
    let gx = if need_input {
        let mut gcol = vec![T::zero(); rows * k];
        gemm_a_bt(grad_out.data(), kernel.data(), &mut gcol, rows, k, p.cout);
        Some(Tensor::new([p.h, p.w, p.cin], col2im(&gcol, &p))?)
    } else {
        None
    };
    Ok(KernelGrads {
        input: gx,
        kernel: Tensor::new(kernel.shape().to_vec(), gk)?,
        bias: Tensor::new([p.cout], gb)?,
    })
}

fn plan_depthwise<T: Scalar>(
    input: &Tensor<T>,
    kernel: &Tensor<T>,
    geom: &ConvGeometry,
) -> Result<Plan> {
    let (h, w, c) = input.hwc()?;
    if kernel.shape() != [geom.kernel_h, geom.kernel_w, c] {
        return Err(Error::shape(
            "depthwise input/kernel",
            input.shape(),
            kernel.shape(),
        ));
    }
    let (oh, ow, pad_top, pad_left) = geom.output(h, w)?;
    Ok(Plan {
        h,
        w,
        cin: c,
        cout: c,
        oh,
        ow,
        pad_top,
        pad_left,
        geom: *geom,
    })
}

/// Per-channel spatial convolution: output channel `c` only sees input
/// channel `c`.
pub fn depthwise_conv2d<T: Scalar>(
    input: &Tensor<T>,
    kernel: &Tensor<T>,
    bias: &Tensor<T>,
    geom: &ConvGeometry,
) -> Result<Tensor<T>> {
    let p = plan_depthwise(input, kernel, geom)?;
    let c = p.cin;
    bias.expect_shape("depthwise bias", &[c])?;
    let (kh, kw, s) = (p.geom.kernel_h, p.geom.kernel_w, p.geom.stride);
    let x = input.data();
    let kd = kernel.data();
    let mut out = vec![T::zero(); p.oh * p.ow * c];
    for oy in 0..p.oh {
        for ox in 0..p.ow {
            let o = &mut out[(oy * p.ow + ox) * c..(oy * p.ow + ox + 1) * c];
            o.copy_from_slice(bias.data());
            for dy in 0..kh {
                let Some(iy) = Plan::src(oy, dy, s, p.pad_top, p.h) else {
                    continue;
                };
                for dx in 0..kw {
                    let Some(ix) = Plan::src(ox, dx, s, p.pad_left, p.w) else {
                        continue;
                    };
                    let xi = &x[(iy * p.w + ix) * c..(iy * p.w + ix + 1) * c];
                    let ki = &kd[(dy * kw + dx) * c..(dy * kw + dx + 1) * c];
                    for ((ov, &xv), &kv) in o.iter_mut().zip(xi).zip(ki) {
                        *ov += xv * kv;
                    }
                }
            }
        }
    }
    Tensor::new([p.oh, p.ow, c], out)
}

pub fn depthwise_conv2d_backward<T: Scalar>(
    input: &Tensor<T>,
    kernel: &Tensor<T>,
    grad_out: &Tensor<T>,
    geom: &ConvGeometry,
    need_input: bool,
) -> Result<KernelGrads<T>> {
    let p = plan_depthwise(input, kernel, geom)?;
    let c = p.cin;
    grad_out.expect_shape("depthwise grad_out", &[p.oh, p.ow, c])?;
    let (kh, kw, s) = (p.geom.kernel_h, p.geom.kernel_w, p.geom.stride);
    let x = input.data();
    let kd = kernel.data();
    let g = grad_out.data();
    let mut gk = vec![T::zero(); kh * kw * c];
    let mut gx = if need_input {
        vec![T::zero(); p.h * p.w * c]
    } else {
        Vec::new()
    };
    for oy in 0..p.oh {
        for ox in 0..p.ow {
            let go = &g[(oy * p.ow + ox) * c..(oy * p.ow + ox + 1) * c];
            for dy in 0..kh {
                let Some(iy) = Plan::src(oy, dy, s, p.pad_top, p.h) else {
                    continue;
                };
                for dx in 0..kw {
                    let Some(ix) = Plan::src(ox, dx, s, p.pad_left, p.w) else {
                        continue;
                    };
                    let xo = (iy * p.w + ix) * c;
                    let ko = (dy * kw + dx) * c;
                    for ch in 0..c {
                        gk[ko + ch] += go[ch] * x[xo + ch];
                    }
                    if need_input {
                        for ch in 0..c {
                            gx[xo + ch] += go[ch] * kd[ko + ch];
                        }
                    }
                }
            }
        }
    }
    Ok(KernelGrads {
        input: if need_input {
            Some(Tensor::new([p.h, p.w, c], gx)?)
        } else {
            None
        },
        kernel: Tensor::new([kh, kw, c], gk)?,
        bias: Tensor::new([c], sum_rows(g, c))?,
    })
}

fn check_pointwise<T: Scalar>(input: &Tensor<T>, kernel: &Tensor<T>) -> Result<(usize, usize)> {
    let (h, w, cin) = input.hwc()?;
    match kernel.shape()[..] {
        [kc, cout] if kc == cin => Ok((h * w, cout)),
        _ => Err(Error::shape(
            "pointwise kernel",
            kernel.shape(),
            &[cin, kernel.shape().last().copied().unwrap_or(0)],
        )),
    }
}

/// 1×1 convolution mixing channels at every pixel.
pub fn pointwise_conv2d<T: Scalar>(
    input: &Tensor<T>,
    kernel: &Tensor<T>,
    bias: &Tensor<T>,
) -> Result<Tensor<T>> {
    let (rows, cout) = check_pointwise(input, kernel)?;
    bias.expect_shape("pointwise bias", &[cout])?;
    let (h, w, cin) = input.hwc()?;
    let mut out = vec![T::zero(); rows * cout];
    gemm(input.data(), kernel.data(), &mut out, rows, cin, cout);
    add_bias_rows(&mut out, bias.data());
    Tensor::new([h, w, cout], out)
}

pub fn pointwise_conv2d_backward<T: Scalar>(
    input: &Tensor<T>,
    kernel: &Tensor<T>,
    grad_out: &Tensor<T>,
    need_input: bool,
) -> Result<KernelGrads<T>> {
    let (rows, cout) = check_pointwise(input, kernel)?;
    let (h, w, cin) = input.hwc()?;
    grad_out.expect_shape("pointwise grad_out", &[h, w, cout])?;
    let mut gk = vec![T::zero(); cin * cout];
    gemm_at_b(input.data(), grad_out.data(), &mut gk, rows, cin, cout);
    let gx = if need_input {
        let mut gx = vec![T::zero(); rows * cin];
        gemm_a_bt(grad_out.data(), kernel.data(), &mut gx, rows, cin, cout);
        Some(Tensor::new([h, w, cin], gx)?)
    } else {
        None
    };
    Ok(KernelGrads {
        input: gx,
        kernel: Tensor::new([cin, cout], gk)?,
        bias: Tensor::new([cout], sum_rows(grad_out.data(), cout))?,
    })
}
