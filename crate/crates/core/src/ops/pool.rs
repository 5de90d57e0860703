//! Max, average and global-average pooling over `H×W×C`.
//!
//! Padded positions never contribute: max ignores them and average divides
//! by the number of in-bounds taps.

use alloc::vec;

use super::geometry::ConvGeometry;
use crate::error::Result;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PoolKind {
    Max(ConvGeometry),
    Avg(ConvGeometry),
    /// Per-channel mean, producing a length-`C` vector.
    GlobalAvg,
}

/// Visits the in-bounds input pixels of every output position.
fn windows(
    h: usize,
    w: usize,
    geom: &ConvGeometry,
    mut f: impl FnMut(usize, &mut dyn Iterator<Item = usize>),
) -> Result<(usize, usize)> {
    let (oh, ow, pt, pl) = geom.output(h, w)?;
    let s = geom.stride;
    for oy in 0..oh {
        let y0 = (oy * s) as isize - pt as isize;
        let ys = (y0.max(0) as usize)..((y0 + geom.kernel_h as isize).min(h as isize) as usize);
        for ox in 0..ow {
            let x0 = (ox * s) as isize - pl as isize;
            let xs = (x0.max(0) as usize)..((x0 + geom.kernel_w as isize).min(w as isize) as usize);
            let mut it = ys.clone().flat_map(|y| xs.clone().map(move |x| y * w + x));
            f(oy * ow + ox, &mut it);
        }
    }
    Ok((oh, ow))
}

pub fn pool<T: Scalar>(input: &Tensor<T>, kind: PoolKind) -> Result<Tensor<T>> {
    let (h, w, c) = input.hwc()?;
    let x = input.data();
    match kind {
        PoolKind::GlobalAvg => {
            let mut acc = vec![T::zero(); c];
            for px in x.chunks_exact(c) {
                for (a, &v) in acc.iter_mut().zip(px) {
                    *a += v;
                }
            }
            let n = T::from_usize(h * w);
            for a in &mut acc {
                *a /= n;
            }
            Tensor::new([c], acc)
        }
        PoolKind::Max(geom) | PoolKind::Avg(geom) => {
            let (oh, ow, _, _) = geom.output(h, w)?;
            let mut out = vec![T::zero(); oh * ow * c];
            let is_max = matches!(kind, PoolKind::Max(_));
            windows(h, w, &geom, |o, pixels| {
                let dst = &mut out[o * c..(o + 1) * c];
                let init = if is_max { T::neg_infinity() } else { T::zero() };
                dst.iter_mut().for_each(|d| *d = init);
                let mut count = 0usize;
                for p in pixels {
                    count += 1;
                    for (d, &v) in dst.iter_mut().zip(&x[p * c..(p + 1) * c]) {
                        if is_max {
                            if v > *d {
                                *d = v;
                            }
                        } else {
                            *d += v;
                        }
                    }
                }
                if !is_max {
                    let n = T::from_usize(count);
                    dst.iter_mut().for_each(|d| *d /= n);
                }
            })?;
            Tensor::new([oh, ow, c], out)
        }
    }
}

pub fn pool_backward<T: Scalar>(
    input: &Tensor<T>,
    kind: PoolKind,
    grad_out: &Tensor<T>,
) -> Result<Tensor<T>> {
    let (h, w, c) = input.hwc()?;
    let x = input.data();
    let g = grad_out.data();
    let mut gx = vec![T::zero(); h * w * c];
    match kind {
        PoolKind::GlobalAvg => {
            grad_out.expect_shape("global pool grad_out", &[c])?;
            let n = T::from_usize(h * w);
            for px in gx.chunks_exact_mut(c) {
                for (d, &gv) in px.iter_mut().zip(g) {
                    *d = gv / n;
                }
            }
        }
        PoolKind::Avg(geom) => {
            let (oh, ow, _, _) = geom.output(h, w)?;
            grad_out.expect_shape("avg pool grad_out", &[oh, ow, c])?;
            windows(h, w, &geom, |o, pixels| {
                let members: alloc::vec::Vec<usize> = pixels.collect();
                let n = T::from_usize(members.len());
                for p in members {
                    for ch in 0..c {
                        gx[p * c + ch] += g[o * c + ch] / n;
                    }
                }
            })?;
        }
        PoolKind::Max(geom) => {
            let (oh, ow, _, _) = geom.output(h, w)?;
            grad_out.expect_shape("max pool grad_out", &[oh, ow, c])?;
            let mut best = vec![usize::MAX; c];
            let mut best_v = vec![T::zero(); c];
            windows(h, w, &geom, |o, pixels| {
                best.iter_mut().for_each(|b| *b = usize::MAX);
                for p in pixels {
                    for ch in 0..c {
                        let v = x[p * c + ch];
                        // first maximum wins ties
                        if best[ch] == usize::MAX || v > best_v[ch] {
                            best[ch] = p;
                            best_v[ch] = v;
                        }
                    }
                }
                for ch in 0..c {
                    gx[best[ch] * c + ch] += g[o * c + ch];
                }
            })?;
        }
    }
    Tensor::new([h, w, c], gx)
}
