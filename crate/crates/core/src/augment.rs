//! Random affine augmentation: rotation, shift, shear, zoom and horizontal
//! flip with nearest-neighbour sampling and edge-clamped ("nearest") fill.
//!
//! The forward transform is applied in a fixed order about the image
//! centre: rotate → shear → zoom → translate → flip. Each output pixel is
//! filled from the inverse-mapped source coordinate.

use alloc::format;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::rng::DetRng;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FillMode {
    /// Out-of-bounds source coordinates are clamped to the nearest edge pixel.
    Nearest,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AugmentConfig {
    /// Rotation angle is drawn from `[0, rotation_range_deg]`.
    pub rotation_range_deg: f64,
    /// Horizontal shift as a fraction of the width, drawn from `±width_shift_frac`.
    pub width_shift_frac: f64,
    pub height_shift_frac: f64,
    /// Shear angle in radians, drawn from `±shear_range`.
    pub shear_range: f64,
    /// Isotropic zoom factor range.
    pub zoom_range: (f64, f64),
    pub horizontal_flip: bool,
    pub fill_mode: FillMode,
    /// Images emitted per source image in offline mode (original included).
    pub oversample_factor: usize,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            rotation_range_deg: 180.0,
            width_shift_frac: 0.1,
            height_shift_frac: 0.1,
            shear_range: 0.1,
            zoom_range: (0.8, 1.5),
            horizontal_flip: true,
            fill_mode: FillMode::Nearest,
            oversample_factor: 10,
        }
    }
}

impl AugmentConfig {
    /// Configuration whose samples are always the identity transform.
    pub fn identity() -> Self {
        Self {
            rotation_range_deg: 0.0,
            width_shift_frac: 0.0,
            height_shift_frac: 0.0,
            shear_range: 0.0,
            zoom_range: (1.0, 1.0),
            horizontal_flip: false,
            fill_mode: FillMode::Nearest,
            oversample_factor: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.rotation_range_deg,
            self.width_shift_frac,
            self.height_shift_frac,
            self.shear_range,
            self.zoom_range.0,
            self.zoom_range.1,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite
            || self.rotation_range_deg < 0.0
            || self.width_shift_frac < 0.0
            || self.height_shift_frac < 0.0
            || self.shear_range < 0.0
        {
            return Err(Error::InvalidArgument(format!(
                "augmentation ranges must be finite and non-negative: {self:?}"
            )));
        }
        if self.zoom_range.0 <= 0.0 || self.zoom_range.1 < self.zoom_range.0 {
            return Err(Error::InvalidArgument(format!(
                "zoom range {:?} must be positive and ordered",
                self.zoom_range
            )));
        }
        if self.oversample_factor == 0 {
            return Err(Error::InvalidArgument(
                "oversample factor must be ≥ 1".into(),
            ));
        }
        Ok(())
    }
}

/// One sampled realisation of an [`AugmentConfig`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AffineParams {
    pub angle_deg: f64,
    pub dx_frac: f64,
    pub dy_frac: f64,
    pub shear: f64,
    pub zoom_x: f64,
    pub zoom_y: f64,
    pub flip: bool,
}

impl AffineParams {
    pub const IDENTITY: Self = Self {
        angle_deg: 0.0,
        dx_frac: 0.0,
        dy_frac: 0.0,
        shear: 0.0,
        zoom_x: 1.0,
        zoom_y: 1.0,
        flip: false,
    };
}

/// Draws parameters in a fixed order (angle, dx, dy, shear, zoom, flip);
/// the number of draws does not depend on the configuration.
pub fn sample_params(config: &AugmentConfig, rng: &mut DetRng) -> AffineParams {
    let angle_deg = rng.uniform(0.0, config.rotation_range_deg);
    let dx_frac = rng.uniform(-config.width_shift_frac, config.width_shift_frac);
    let dy_frac = rng.uniform(-config.height_shift_frac, config.height_shift_frac);
    let shear = rng.uniform(-config.shear_range, config.shear_range);
    let zoom = rng.uniform(config.zoom_range.0, config.zoom_range.1);
    let coin = rng.coin();
    AffineParams {
        angle_deg,
        dx_frac,
        dy_frac,
        shear,
        zoom_x: zoom,
        zoom_y: zoom,
        flip: config.horizontal_flip && coin,
    }
}

/// Seeded generator for one (image, epoch/variant) pair.
pub fn item_rng(seed: u64, item: u64, draw: u64) -> DetRng {
    DetRng::derived(seed, &[item, draw])
}

/// Inverse-maps output pixel `(y, x)` to a source pixel (edge-clamped).
fn source_pixel(params: &AffineParams, h: usize, w: usize, y: usize, x: usize) -> (usize, usize) {
    let cy = (h as f64 - 1.0) / 2.0;
    let cx = (w as f64 - 1.0) / 2.0;
    let x = if params.flip {
        (w - 1 - x) as f64
    } else {
        x as f64
    };
    let y = y as f64;
    // undo translation
    let u = x - cx - params.dx_frac * w as f64;
    let v = y - cy - params.dy_frac * h as f64;
    // undo zoom
    let u = u / params.zoom_x;
    let v = v / params.zoom_y;
    // undo shear x' = x + tan(s)·y
    let u = u - params.shear.tan() * v;
    // undo rotation
    let (sin, cos) = params.angle_deg.to_radians().sin_cos();
    let sx = cos * u + sin * v + cx;
    let sy = -sin * u + cos * v + cy;
    let clamp = |p: f64, n: usize| -> usize {
        let r = p.round();
        if r.is_nan() || r <= 0.0 {
            0
        } else if r >= (n - 1) as f64 {
            n - 1
        } else {
            r as usize
        }
    };
    (clamp(sy, h), clamp(sx, w))
}

pub fn apply_affine<T: Scalar>(image: &Tensor<T>, params: &AffineParams) -> Result<Tensor<T>> {
    let (h, w, c) = image.hwc()?;
    let src = image.data();
    let mut out = Vec::with_capacity(src.len());
    for y in 0..h {
        for x in 0..w {
            let (sy, sx) = source_pixel(params, h, w, y, x);
            let o = (sy * w + sx) * c;
            out.extend_from_slice(&src[o..o + c]);
        }
    }
    Tensor::new([h, w, c], out)
}

/// Offline materialisation: per source image, the original followed by
/// `oversample_factor − 1` augmented variants. Labels pass through.
pub fn augment_offline<'a, T: Scalar>(
    items: &'a [(Tensor<T>, usize)],
    config: &'a AugmentConfig,
    seed: u64,
) -> impl Iterator<Item = Result<(Tensor<T>, usize)>> + 'a {
    let factor = config.oversample_factor as u64;
    items.iter().enumerate().flat_map(move |(i, (img, label))| {
        (0..factor).map(move |k| {
            if k == 0 {
                return Ok((img.clone(), *label));
            }
            let mut rng = item_rng(seed, i as u64, k);
            let p = sample_params(config, &mut rng);
            Ok((apply_affine(img, &p)?, *label))
        })
    })
}

/// Online mode: one fresh variant of each image for the given epoch.
pub fn augment_online<'a, T: Scalar>(
    items: &'a [(Tensor<T>, usize)],
    config: &'a AugmentConfig,
    seed: u64,
    epoch: u64,
) -> impl Iterator<Item = Result<(Tensor<T>, usize)>> + 'a {
    items.iter().enumerate().map(move |(i, (img, label))| {
        Ok((augment_one(img, config, seed, i as u64, epoch)?, *label))
    })
}

/// A single online variant of item `index` for `epoch`.
pub fn augment_one<T: Scalar>(
    image: &Tensor<T>,
    config: &AugmentConfig,
    seed: u64,
    index: u64,
    epoch: u64,
) -> Result<Tensor<T>> {
    // draw indices ≥ 2^32 keep online streams apart from offline variants
    let mut rng = item_rng(seed, index, (1 << 32) + epoch);
    let p = sample_params(config, &mut rng);
    apply_affine(image, &p)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn marker(h: usize, w: usize) -> Tensor<f32> {
        Tensor::from_fn([h, w, 1], |i| i as f32 / (h * w) as f32)
    }

    #[test]
    fn defaults_match_recipe() {
        let c = AugmentConfig::default();
        assert_eq!(c.rotation_range_deg, 180.0);
        assert_eq!(c.width_shift_frac, 0.1);
        assert_eq!(c.height_shift_frac, 0.1);
        assert_eq!(c.shear_range, 0.1);
        assert_eq!(c.zoom_range, (0.8, 1.5));
        assert!(c.horizontal_flip);
        assert_eq!(c.fill_mode, FillMode::Nearest);
        assert_eq!(c.oversample_factor, 10);
        c.validate().unwrap();
    }

    #[test]
    fn identity_config_samples_identity() {
        let mut rng = DetRng::new(5);
        for _ in 0..20 {
            assert_eq!(
                sample_params(&AugmentConfig::identity(), &mut rng),
                AffineParams::IDENTITY
            );
        }
    }

    #[test]
    fn identity_params_exact() {
        for (h, w) in [(5, 5), (4, 6), (1, 1), (7, 2)] {
            let img = marker(h, w);
            assert_eq!(apply_affine(&img, &AffineParams::IDENTITY).unwrap(), img);
        }
    }

    #[test]
    fn flip_mirrors() {
        let img = marker(4, 5);
        let p = AffineParams {
            flip: true,
            ..AffineParams::IDENTITY
        };
        let out = apply_affine(&img, &p).unwrap();
        for y in 0..4 {
            for x in 0..5 {
                assert_eq!(out.get(&[y, x, 0]), img.get(&[y, 4 - x, 0]));
            }
        }
    }

    #[test]
    fn shift_clamps_to_edge() {
        let img = marker(4, 10);
        let p = AffineParams {
            dx_frac: 0.1,
            ..AffineParams::IDENTITY
        };
        let out = apply_affine(&img, &p).unwrap();
        for y in 0..4 {
            // content moves right by one pixel; column 0 repeats the edge
            assert_eq!(out.get(&[y, 0, 0]), img.get(&[y, 0, 0]));
            for x in 1..10 {
                assert_eq!(out.get(&[y, x, 0]), img.get(&[y, x - 1, 0]));
            }
        }
    }

    #[test]
    fn offline_counts_and_labels() {
        let items: Vec<(Tensor<f32>, usize)> = (0..7).map(|i| (marker(6, 6), i % 3)).collect();
        let cfg = AugmentConfig::default();
        let out: Vec<_> = augment_offline(&items, &cfg, 1)
            .collect::<Result<_>>()
            .unwrap();
        assert_eq!(out.len(), 70);
        for (k, (_, label)) in out.iter().enumerate() {
            assert_eq!(*label, items[k / 10].1);
        }
        assert_eq!(out[0].0, items[0].0);
        let one = AugmentConfig {
            oversample_factor: 1,
            ..cfg
        };
        let out: Vec<_> = augment_offline(&items, &one, 1)
            .collect::<Result<_>>()
            .unwrap();
        assert_eq!(out.len(), 7);
        assert!(out.iter().zip(&items).all(|(a, b)| a == b));
    }

    #[test]
    fn rejects_bad_config() {
        let bad = AugmentConfig {
            zoom_range: (0.0, 1.0),
            ..AugmentConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = AugmentConfig {
            oversample_factor: 0,
            ..AugmentConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
