//! Backbone builders for the three feature-extractor families, the dense
//! classifier head and backbone/head composition.
//!
//! All builders take the model input shape (`H×W×C`). Channel widths are
//! canonical widths scaled by a width multiplier, rounded up, minimum 1.

use alloc::format;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::layer::LayerKind;
use crate::model::{ModelSpec, NodeRef};
use crate::ops::{ActivationKind, ConvGeometry, Padding, PoolKind, DEFAULT_BN_EPS};

/// Hidden widths of the classifier head at scale 1.
pub const HEAD_WIDTHS: [usize; 5] = [1024, 512, 512, 256, 128];

const MOBILENET_STEM: usize = 32;
const MOBILENET_MAX: usize = 1024;
const RESNET_STEM: usize = 64;
const NASNET_STEM: usize = 32;

/// `max(1, ceil(channels · multiplier))`.
pub fn scaled_width(channels: usize, multiplier: f64) -> usize {
    // the small offset absorbs representation error in products like 32·0.3
    let v = (channels as f64 * multiplier - 1e-9).ceil();
    (v as usize).max(1)
}

fn check_multiplier(m: f64) -> Result<()> {
    if !(m > 0.0 && m <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "width multiplier {m} outside (0, 1]"
        )));
    }
    Ok(())
}

fn check_image(input: [usize; 3]) -> Result<()> {
    if input.contains(&0) {
        return Err(Error::InvalidArgument(format!(
            "invalid input shape {input:?}"
        )));
    }
    Ok(())
}

fn conv(out_channels: usize, k: usize, stride: usize) -> LayerKind {
    LayerKind::Conv {
        out_channels,
        geometry: ConvGeometry::square(k, stride, Padding::Same),
    }
}

fn depthwise(k: usize, stride: usize) -> LayerKind {
    LayerKind::DepthwiseConv {
        geometry: ConvGeometry::square(k, stride, Padding::Same),
    }
}

fn pointwise(out_channels: usize) -> LayerKind {
    LayerKind::PointwiseConv { out_channels }
}

const BN: LayerKind = LayerKind::BatchNorm {
    eps: DEFAULT_BN_EPS,
};
const RELU: LayerKind = LayerKind::Activation(ActivationKind::Relu);
const RELU6: LayerKind = LayerKind::Activation(ActivationKind::Relu6);
const GLOBAL_POOL: LayerKind = LayerKind::Pool(PoolKind::GlobalAvg);

/// Depthwise-separable backbone.
///
/// Stem: 3×3 conv stride 2 → BN → relu6. Then `num_blocks` blocks of
/// depthwise 3×3 → BN → relu6 → pointwise → BN → relu6. Every second block
/// has a stride-2 depthwise conv. Output channels double at the first block
/// and at every strided block (canonical widths 32 → 64 → 128 …, capped at
/// 1024). Ends in global average pooling.
pub fn build_mobilenet_style(
    input: [usize; 3],
    width_multiplier: f64,
    num_blocks: usize,
) -> Result<ModelSpec> {
    check_image(input)?;
    check_multiplier(width_multiplier)?;
    if num_blocks == 0 {
        return Err(Error::InvalidArgument(
            "mobilenet needs at least one block".into(),
        ));
    }
    let mut spec = ModelSpec::new(input);
    let mut canonical = MOBILENET_STEM;
    let mut x = spec.then(
        NodeRef::Input,
        "stem_conv",
        conv(scaled_width(canonical, width_multiplier), 3, 2),
    );
    x = spec.then(x, "stem_bn", BN);
    x = spec.then(x, "stem_relu", RELU6);
    for b in 1..=num_blocks {
        let strided = b % 2 == 0;
        if b == 1 || strided {
            canonical = (canonical * 2).min(MOBILENET_MAX);
        }
        let out = scaled_width(canonical, width_multiplier);
        let stride = if strided { 2 } else { 1 };
        x = spec.then(x, format!("block{b}_dw"), depthwise(3, stride));
        x = spec.then(x, format!("block{b}_dw_bn"), BN);
        x = spec.then(x, format!("block{b}_dw_relu"), RELU6);
        x = spec.then(x, format!("block{b}_pw"), pointwise(out));
        x = spec.then(x, format!("block{b}_pw_bn"), BN);
        x = spec.then(x, format!("block{b}_pw_relu"), RELU6);
    }
    spec.then(x, "global_pool", GLOBAL_POOL);
    spec.shape_pass()?;
    Ok(spec)
}

/// Pre-activation residual block. `stride > 1` (or a channel change) makes
/// it a convolutional block with a strided 1×1 projection on the skip path;
/// otherwise the skip is a pass-through (identity block).
fn residual_block(
    spec: &mut ModelSpec,
    x: NodeRef,
    name: &str,
    channels: usize,
    stride: usize,
    project: bool,
) -> NodeRef {
    let bn = spec.then(x, format!("{name}_pre_bn"), BN);
    let pre = spec.then(bn, format!("{name}_pre_relu"), RELU);
    let mut y = spec.then(pre, format!("{name}_conv1"), conv(channels, 3, stride));
    y = spec.then(y, format!("{name}_bn2"), BN);
    y = spec.then(y, format!("{name}_relu2"), RELU);
    y = spec.then(y, format!("{name}_conv2"), conv(channels, 3, 1));
    let skip = if project {
        spec.then(pre, format!("{name}_proj"), conv(channels, 1, stride))
    } else {
        x
    };
    spec.push(format!("{name}_add"), LayerKind::ResidualAdd, &[y, skip])
}

/// Pre-activation (v2) residual backbone.
///
/// Stem: 3×3 conv stride 2. Each stage opens with a convolutional block
/// (stride 2, 1×1 projection on the skip) followed by identity blocks, and
/// doubles the canonical width (64, 128, …). Ends in BN → relu → global
/// average pooling.
pub fn build_resnet_v2_style(
    input: [usize; 3],
    num_stages: usize,
    blocks_per_stage: usize,
    width_multiplier: f64,
) -> Result<ModelSpec> {
    check_image(input)?;
    check_multiplier(width_multiplier)?;
    if num_stages == 0 || blocks_per_stage == 0 {
        return Err(Error::InvalidArgument(
            "resnet needs at least one stage and one block per stage".into(),
        ));
    }
    let mut spec = ModelSpec::new(input);
    let mut x = spec.then(
        NodeRef::Input,
        "stem_conv",
        conv(scaled_width(RESNET_STEM, width_multiplier), 3, 2),
    );
    for s in 0..num_stages {
        let channels = scaled_width(RESNET_STEM << s, width_multiplier);
        for b in 0..blocks_per_stage {
            let name = format!("stage{}_block{}", s + 1, b + 1);
            x = if b == 0 {
                residual_block(&mut spec, x, &name, channels, 2, true)
            } else {
                residual_block(&mut spec, x, &name, channels, 1, false)
            };
        }
    }
    x = spec.then(x, "post_bn", BN);
    x = spec.then(x, "post_relu", RELU);
    spec.then(x, "global_pool", GLOBAL_POOL);
    spec.shape_pass()?;
    Ok(spec)
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum CellType {
    Normal,
    Reduction,
}

/// Two-branch cell on a 1×1-adjusted input `h` of `width` channels.
///
/// Normal: `concat(sepconv3×3(h) + h, avgpool3×3(h))`, stride 1.
/// Reduction: `concat(sepconv3×3(h, stride 2), maxpool3×3(h, stride 2))`.
/// Output has `2·width` channels.
fn cell(spec: &mut ModelSpec, x: NodeRef, name: &str, width: usize, kind: CellType) -> NodeRef {
    let mut h = spec.then(x, format!("{name}_adjust"), pointwise(width));
    h = spec.then(h, format!("{name}_adjust_bn"), BN);
    h = spec.then(h, format!("{name}_adjust_relu"), RELU);
    let stride = if kind == CellType::Reduction { 2 } else { 1 };
    let mut sep = spec.then(h, format!("{name}_sep_dw"), depthwise(3, stride));
    sep = spec.then(sep, format!("{name}_sep_pw"), pointwise(width));
    sep = spec.then(sep, format!("{name}_sep_bn"), BN);
    let (left, right) = match kind {
        CellType::Normal => {
            let sum = spec.push(format!("{name}_sep_add"), LayerKind::ResidualAdd, &[sep, h]);
            let pool = spec.then(
                h,
                format!("{name}_avgpool"),
                LayerKind::Pool(PoolKind::Avg(ConvGeometry::square(3, 1, Padding::Same))),
            );
            (sum, pool)
        }
        CellType::Reduction => {
            let pool = spec.then(
                h,
                format!("{name}_maxpool"),
                LayerKind::Pool(PoolKind::Max(ConvGeometry::square(3, 2, Padding::Same))),
            );
            (sep, pool)
        }
    };
    spec.push(format!("{name}_concat"), LayerKind::Concat, &[left, right])
}

/// Cell-based backbone: stem 3×3 conv stride 2 → BN → relu, then
/// `[normal × n, reduction] × num_reductions`, `n` trailing normal cells and
/// global average pooling. Cell widths start at 32 (canonical) and double
/// at every reduction.
pub fn build_nasnet_cell_style(
    input: [usize; 3],
    num_normal_cells: usize,
    num_reductions: usize,
    width_multiplier: f64,
) -> Result<ModelSpec> {
    check_image(input)?;
    check_multiplier(width_multiplier)?;
    if num_normal_cells == 0 {
        return Err(Error::InvalidArgument(
            "nasnet needs at least one normal cell".into(),
        ));
    }
    let mut spec = ModelSpec::new(input);
    let mut x = spec.then(
        NodeRef::Input,
        "stem_conv",
        conv(scaled_width(NASNET_STEM, width_multiplier), 3, 2),
    );
    x = spec.then(x, "stem_bn", BN);
    x = spec.then(x, "stem_relu", RELU);
    let mut idx = 0;
    for r in 0..=num_reductions {
        let width = scaled_width(NASNET_STEM << r, width_multiplier);
        for _ in 0..num_normal_cells {
            idx += 1;
            x = cell(
                &mut spec,
                x,
                &format!("cell{idx}_normal"),
                width,
                CellType::Normal,
            );
        }
        if r < num_reductions {
            idx += 1;
            let width = scaled_width(NASNET_STEM << (r + 1), width_multiplier);
            x = cell(
                &mut spec,
                x,
                &format!("cell{idx}_reduction"),
                width,
                CellType::Reduction,
            );
        }
    }
    spec.then(x, "global_pool", GLOBAL_POOL);
    spec.shape_pass()?;
    Ok(spec)
}

/// Hidden layer widths `round(width_scale · HEAD_WIDTHS)`, minimum 1.
pub fn head_widths(width_scale: f64) -> Vec<usize> {
    HEAD_WIDTHS
        .iter()
        .map(|&w| ((w as f64 * width_scale).round() as usize).max(1))
        .collect()
}

/// Dense classifier head as a standalone fragment whose input is the
/// pooled feature vector: five relu dense layers, a `num_classes` dense
/// layer and softmax.
pub fn build_classifier_head(
    feature_len: usize,
    num_classes: usize,
    width_scale: f64,
) -> Result<ModelSpec> {
    if feature_len == 0 || num_classes == 0 {
        return Err(Error::InvalidArgument(
            "head needs a positive feature length and class count".into(),
        ));
    }
    if !(width_scale > 0.0 && width_scale <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "head width scale {width_scale} outside (0, 1]"
        )));
    }
    let mut spec = ModelSpec::new([feature_len]);
    let mut x = NodeRef::Input;
    for (i, units) in head_widths(width_scale).into_iter().enumerate() {
        x = spec.then(x, format!("head_fc{}", i + 1), LayerKind::Dense { units });
        x = spec.then(x, format!("head_fc{}_relu", i + 1), RELU);
    }
    x = spec.then(x, "head_logits", LayerKind::Dense { units: num_classes });
    spec.then(x, "head_softmax", LayerKind::Softmax);
    spec.shape_pass()?;
    Ok(spec)
}

/// Composes a backbone and a head fragment; the backbone boundary is set at
/// the junction.
pub fn attach_head(backbone: &ModelSpec, head: &ModelSpec) -> Result<ModelSpec> {
    let plan = backbone.shape_pass()?;
    let features = plan.output_shape();
    let backbone_len = match features {
        [n] => *n,
        other => {
            return Err(Error::InvalidModel(format!(
                "backbone output {other:?} is not a feature vector"
            )))
        }
    };
    let head_len = match head.input_shape[..] {
        [n] => n,
        _ => {
            return Err(Error::InvalidModel(format!(
                "head input {:?} is not a feature vector",
                head.input_shape
            )))
        }
    };
    if backbone_len != head_len {
        return Err(Error::FeatureLengthMismatch {
            backbone: backbone_len,
            head: head_len,
        });
    }
    if let Some(l) = head.layers.iter().find(|l| !l.kind.is_head_kind()) {
        return Err(Error::InvalidModel(format!(
            "head layer {:?} is not a dense/activation/softmax layer",
            l.name
        )));
    }
    let n = backbone.layers.len();
    let mut spec = backbone.clone();
    for layer in &head.layers {
        let mut l = layer.clone();
        for r in &mut l.inputs {
            *r = match *r {
                NodeRef::Input => NodeRef::Layer(n - 1),
                NodeRef::Layer(j) => NodeRef::Layer(j + n),
            };
        }
        spec.layers.push(l);
    }
    spec.backbone_boundary = Some(n - 1);
    spec.shape_pass()?;
    Ok(spec)
}

/// Splits a composed model back into `(backbone, head)`.
pub fn detach_head(model: &ModelSpec) -> Result<(ModelSpec, ModelSpec)> {
    let b = model
        .backbone_boundary
        .ok_or_else(|| Error::InvalidModel("model has no head attached".into()))?;
    let plan = model.shape_pass()?;
    let mut backbone = ModelSpec::new(model.input_shape.clone());
    backbone.layers = model.layers[..=b].to_vec();
    let mut head = ModelSpec::new(plan.layer_shapes[b].clone());
    for layer in &model.layers[b + 1..] {
        let mut l = layer.clone();
        for r in &mut l.inputs {
            *r = match *r {
                NodeRef::Layer(j) if j == b => NodeRef::Input,
                NodeRef::Layer(j) if j > b => NodeRef::Layer(j - b - 1),
                _ => {
                    return Err(Error::InvalidModel(format!(
                        "head layer {:?} reads inside the backbone",
                        l.name
                    )))
                }
            };
        }
        head.layers.push(l);
    }
    Ok((backbone, head))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Family {
    MobileNet,
    ResNet,
    NasNet,
}

/// Size presets. `Paper` keeps the full-width head.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scale {
    Tiny,
    Small,
    Paper,
}

impl FromStr for Family {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mobilenet" => Ok(Family::MobileNet),
            "resnet" => Ok(Family::ResNet),
            "nasnet" => Ok(Family::NasNet),
            other => Err(Error::InvalidArgument(format!(
                "unknown model family {other:?}"
            ))),
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::MobileNet => "mobilenet",
            Family::ResNet => "resnet",
            Family::NasNet => "nasnet",
        })
    }
}

impl FromStr for Scale {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tiny" => Ok(Scale::Tiny),
            "small" => Ok(Scale::Small),
            "paper" => Ok(Scale::Paper),
            other => Err(Error::InvalidArgument(format!("unknown scale {other:?}"))),
        }
    }
}

impl fmt::Display for Scale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scale::Tiny => "tiny",
            Scale::Small => "small",
            Scale::Paper => "paper",
        })
    }
}

impl Scale {
    pub fn head_width_scale(self) -> f64 {
        match self {
            Scale::Tiny => 0.125,
            Scale::Small => 0.25,
            Scale::Paper => 1.0,
        }
    }
}

/// Backbone for a family at a preset scale.
pub fn build_backbone(family: Family, scale: Scale, input: [usize; 3]) -> Result<ModelSpec> {
    match (family, scale) {
        (Family::MobileNet, Scale::Tiny) => build_mobilenet_style(input, 0.25, 4),
        (Family::MobileNet, Scale::Small) => build_mobilenet_style(input, 0.5, 6),
        (Family::MobileNet, Scale::Paper) => build_mobilenet_style(input, 1.0, 13),
        (Family::ResNet, Scale::Tiny) => build_resnet_v2_style(input, 2, 1, 0.25),
        (Family::ResNet, Scale::Small) => build_resnet_v2_style(input, 3, 2, 0.5),
        (Family::ResNet, Scale::Paper) => build_resnet_v2_style(input, 4, 3, 1.0),
        (Family::NasNet, Scale::Tiny) => build_nasnet_cell_style(input, 1, 1, 0.25),
        (Family::NasNet, Scale::Small) => build_nasnet_cell_style(input, 2, 2, 0.5),
        (Family::NasNet, Scale::Paper) => build_nasnet_cell_style(input, 4, 2, 1.0),
    }
}

/// Backbone plus classifier head for a family at a preset scale.
pub fn build_classifier(
    family: Family,
    scale: Scale,
    input: [usize; 3],
    num_classes: usize,
) -> Result<ModelSpec> {
    let backbone = build_backbone(family, scale, input)?;
    let features = backbone.shape_pass()?.output_shape()[0];
    let head = build_classifier_head(features, num_classes, scale.head_width_scale())?;
    attach_head(&backbone, &head)
}
