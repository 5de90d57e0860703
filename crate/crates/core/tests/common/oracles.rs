//! Direct-summation reference implementations, written independently of
//! the library's kernels.

use banknote_core::Tensor;

/// Output size and leading pad of one axis.
pub fn axis(input: usize, kernel: usize, stride: usize, same: bool) -> (usize, usize) {
    if same {
        let out = input.div_ceil(stride);
        let total = ((out - 1) * stride + kernel).saturating_sub(input);
        (out, total / 2)
    } else {
        ((input - kernel) / stride + 1, 0)
    }
}

/// Six nested loops over (oy, ox, co, ky, kx, ci).
#[allow(clippy::too_many_arguments)]
pub fn conv(
    x: &[f64],
    (h, w, cin): (usize, usize, usize),
    k: &[f64],
    (kh, kw, cout): (usize, usize, usize),
    bias: &[f64],
    stride: usize,
    same: bool,
) -> (Vec<f64>, usize, usize) {
    let (oh, pt) = axis(h, kh, stride, same);
    let (ow, pl) = axis(w, kw, stride, same);
    let mut out = vec![0.0; oh * ow * cout];
    for oy in 0..oh {
        for ox in 0..ow {
            for co in 0..cout {
                let mut acc = bias[co];
                for ky in 0..kh {
                    for kx in 0..kw {
                        for ci in 0..cin {
                            let iy = (oy * stride + ky) as isize - pt as isize;
                            let ix = (ox * stride + kx) as isize - pl as isize;
                            if iy < 0 || ix < 0 || iy >= h as isize || ix >= w as isize {
                                continue;
                            }
                            let xv = x[(iy as usize * w + ix as usize) * cin + ci];
                            acc += xv * k[((ky * kw + kx) * cin + ci) * cout + co];
                        }
                    }
                }
                out[(oy * ow + ox) * cout + co] = acc;
            }
        }
    }
    (out, oh, ow)
}

pub fn depthwise(
    x: &[f64],
    (h, w, c): (usize, usize, usize),
    k: &[f64],
    (kh, kw): (usize, usize),
    bias: &[f64],
    stride: usize,
    same: bool,
) -> Vec<f64> {
    let (oh, pt) = axis(h, kh, stride, same);
    let (ow, pl) = axis(w, kw, stride, same);
    let mut out = vec![0.0; oh * ow * c];
    for oy in 0..oh {
        for ox in 0..ow {
            for ch in 0..c {
                let mut acc = bias[ch];
                for ky in 0..kh {
                    for kx in 0..kw {
                        let iy = (oy * stride + ky) as isize - pt as isize;
                        let ix = (ox * stride + kx) as isize - pl as isize;
                        if iy >= 0 && ix >= 0 && iy < h as isize && ix < w as isize {
                            acc += x[(iy as usize * w + ix as usize) * c + ch]
                                * k[(ky * kw + kx) * c + ch];
                        }
                    }
                }
                out[(oy * ow + ox) * c + ch] = acc;
            }
        }
    }
    out
}

pub fn dense(x: &[f64], weights: &[f64], bias: &[f64]) -> Vec<f64> {
    let m = bias.len();
    (0..m)
        .map(|j| {
            bias[j]
                + x.iter()
                    .enumerate()
                    .map(|(i, xv)| xv * weights[i * m + j])
                    .sum::<f64>()
        })
        .collect()
}

pub fn batchnorm(
    x: &[f64],
    gamma: &[f64],
    beta: &[f64],
    mean: &[f64],
    var: &[f64],
    eps: f64,
) -> Vec<f64> {
    let c = gamma.len();
    x.iter()
        .enumerate()
        .map(|(i, v)| {
            let ch = i % c;
            gamma[ch] * (v - mean[ch]) / (var[ch] + eps).sqrt() + beta[ch]
        })
        .collect()
}

/// Pooling over in-bounds taps only; `max` selects max vs mean.
pub fn pool(
    x: &[f64],
    (h, w, c): (usize, usize, usize),
    k: usize,
    stride: usize,
    same: bool,
    max: bool,
) -> Vec<f64> {
    let (oh, pt) = axis(h, k, stride, same);
    let (ow, pl) = axis(w, k, stride, same);
    let mut out = Vec::with_capacity(oh * ow * c);
    for oy in 0..oh {
        for ox in 0..ow {
            for ch in 0..c {
                let mut taps = Vec::new();
                for ky in 0..k {
                    for kx in 0..k {
                        let iy = (oy * stride + ky) as isize - pt as isize;
                        let ix = (ox * stride + kx) as isize - pl as isize;
                        if iy >= 0 && ix >= 0 && iy < h as isize && ix < w as isize {
                            taps.push(x[(iy as usize * w + ix as usize) * c + ch]);
                        }
                    }
                }
                out.push(if max {
                    taps.iter().copied().fold(f64::NEG_INFINITY, f64::max)
                } else {
                    taps.iter().sum::<f64>() / taps.len() as f64
                });
            }
        }
    }
    out
}

pub fn softmax(z: &[f64]) -> Vec<f64> {
    let e: Vec<f64> = z.iter().map(|v| v.exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|v| v / s).collect()
}

/// Output pixel `(y, x)` reads the source at the point obtained by rotating
/// `(x − cx, y − cy)` by `angle` (image axes, y down) back onto the source.
pub fn rotate_nearest(img: &Tensor<f64>, angle_deg: f64) -> Tensor<f64> {
    let (h, w, c) = img.hwc().unwrap();
    let theta = angle_deg * std::f64::consts::PI / 180.0;
    let (cy, cx) = ((h - 1) as f64 / 2.0, (w - 1) as f64 / 2.0);
    let mut out = Tensor::zeros([h, w, c]);
    for y in 0..h {
        for x in 0..w {
            let dx = x as f64 - cx;
            let dy = y as f64 - cy;
            let sx = theta.cos() * dx + theta.sin() * dy + cx;
            let sy = -theta.sin() * dx + theta.cos() * dy + cy;
            let sy = (sy.round().max(0.0) as usize).min(h - 1);
            let sx = (sx.round().max(0.0) as usize).min(w - 1);
            for ch in 0..c {
                out.set(&[y, x, ch], img.get(&[sy, sx, ch]));
            }
        }
    }
    out
}
