//! Layer kinds, their parameter declarations and forward/backward dispatch.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::ops::{self, ActivationKind, ConvGeometry, PoolKind};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LayerKind {
    Conv {
        out_channels: usize,
        geometry: ConvGeometry,
    },
    DepthwiseConv {
        geometry: ConvGeometry,
    },
    PointwiseConv {
        out_channels: usize,
    },
    BatchNorm {
        eps: f64,
    },
    Activation(ActivationKind),
    Pool(PoolKind),
    Dense {
        units: usize,
    },
    Softmax,
    ResidualAdd,
    Concat,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Init {
    /// Normal with standard deviation `sqrt(2 / fan_in)`.
    HeNormal {
        fan_in: usize,
    },
    Zeros,
    Ones,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParamDecl {
    pub suffix: &'static str,
    pub shape: Vec<usize>,
    pub trainable: bool,
    pub init: Init,
}

impl ParamDecl {
    fn new(suffix: &'static str, shape: Vec<usize>, init: Init) -> Self {
        Self {
            suffix,
            shape,
            trainable: true,
            init,
        }
    }

    fn fixed(suffix: &'static str, shape: Vec<usize>, init: Init) -> Self {
        Self {
            trainable: false,
            ..Self::new(suffix, shape, init)
        }
    }
}

/// Gradients produced by one layer's backward pass.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerGrads<T> {
    /// One entry per layer input; empty when input gradients were not requested.
    pub grad_inputs: Vec<Tensor<T>>,
    /// Gradients of the trainable parameters, keyed by parameter suffix.
    pub grad_params: Vec<(&'static str, Tensor<T>)>,
}

impl<T> LayerGrads<T> {
    pub fn param(&self, suffix: &str) -> Option<&Tensor<T>> {
        self.grad_params
            .iter()
            .find(|(s, _)| *s == suffix)
            .map(|(_, t)| t)
    }
}

fn single<'a>(kind: &LayerKind, inputs: &[&'a [usize]]) -> Result<&'a [usize]> {
    match inputs {
        [one] => Ok(one),
        _ => Err(Error::InvalidModel(format!(
            "{kind:?} takes exactly one input, got {}",
            inputs.len()
        ))),
    }
}

fn hwc(shape: &[usize], op: &str) -> Result<(usize, usize, usize)> {
    match shape {
        [h, w, c] => Ok((*h, *w, *c)),
        _ => Err(Error::InvalidModel(format!(
            "{op} expects an H×W×C input, got {shape:?}"
        ))),
    }
}

impl LayerKind {
    /// True for the layer kinds allowed in a classifier head.
    pub fn is_head_kind(&self) -> bool {
        matches!(
            self,
            LayerKind::Dense { .. } | LayerKind::Activation(_) | LayerKind::Softmax
        )
    }

    pub fn is_multi_input(&self) -> bool {
        matches!(self, LayerKind::ResidualAdd | LayerKind::Concat)
    }

    /// Static shape inference.
    pub fn output_shape(&self, inputs: &[&[usize]]) -> Result<Vec<usize>> {
        match *self {
            LayerKind::Conv {
                out_channels,
                geometry,
            } => {
                let (h, w, _) = hwc(single(self, inputs)?, "conv")?;
                let (oh, ow, _, _) = geometry.output(h, w)?;
                Ok(vec![oh, ow, out_channels])
            }
            LayerKind::DepthwiseConv { geometry } => {
                let (h, w, c) = hwc(single(self, inputs)?, "depthwise_conv")?;
                let (oh, ow, _, _) = geometry.output(h, w)?;
                Ok(vec![oh, ow, c])
            }
            LayerKind::PointwiseConv { out_channels } => {
                let (h, w, _) = hwc(single(self, inputs)?, "pointwise_conv")?;
                Ok(vec![h, w, out_channels])
            }
            LayerKind::BatchNorm { .. } | LayerKind::Activation(_) => {
                Ok(single(self, inputs)?.to_vec())
            }
            LayerKind::Pool(kind) => {
                let (h, w, c) = hwc(single(self, inputs)?, "pool")?;
                match kind {
                    PoolKind::GlobalAvg => Ok(vec![c]),
                    PoolKind::Max(g) | PoolKind::Avg(g) => {
                        let (oh, ow, _, _) = g.output(h, w)?;
                        Ok(vec![oh, ow, c])
                    }
                }
            }
            LayerKind::Dense { units } => match single(self, inputs)? {
                [_] => Ok(vec![units]),
                s => Err(Error::InvalidModel(format!(
                    "dense expects a vector input, got {s:?}"
                ))),
            },
            LayerKind::Softmax => match single(self, inputs)? {
                [k] => Ok(vec![*k]),
                s => Err(Error::InvalidModel(format!(
                    "softmax expects a vector input, got {s:?}"
                ))),
            },
            LayerKind::ResidualAdd => {
                let first = inputs
                    .first()
                    .ok_or_else(|| Error::InvalidModel("residual add without inputs".into()))?;
                for s in inputs {
                    if s != first {
                        return Err(Error::shape("residual_add", first, s));
                    }
                }
                Ok(first.to_vec())
            }
            LayerKind::Concat => {
                let first = inputs
                    .first()
                    .ok_or_else(|| Error::InvalidModel("concat without inputs".into()))?;
                let lead = &first[..first.len() - 1];
                let mut channels = 0;
                for s in inputs {
                    if s.len() != first.len() || &s[..s.len() - 1] != lead {
                        return Err(Error::shape("concat", first, s));
                    }
                    channels += s[s.len() - 1];
                }
                let mut out = lead.to_vec();
                out.push(channels);
                Ok(out)
            }
        }
    }

    /// Parameters in declaration order, for the given input shapes.
    pub fn params(&self, inputs: &[&[usize]]) -> Result<Vec<ParamDecl>> {
        let in_channels = || -> Result<usize> {
            Ok(*single(self, inputs)?
                .last()
                .ok_or_else(|| Error::InvalidModel("scalar input".into()))?)
        };
        Ok(match *self {
            LayerKind::Conv {
                out_channels,
                geometry: g,
            } => {
                let cin = in_channels()?;
                vec![
                    ParamDecl::new(
                        "kernel",
                        vec![g.kernel_h, g.kernel_w, cin, out_channels],
                        Init::HeNormal {
                            fan_in: g.kernel_h * g.kernel_w * cin,
                        },
                    ),
                    ParamDecl::new("bias", vec![out_channels], Init::Zeros),
                ]
            }
            LayerKind::DepthwiseConv { geometry: g } => {
                let c = in_channels()?;
                vec![
                    ParamDecl::new(
                        "kernel",
                        vec![g.kernel_h, g.kernel_w, c],
                        Init::HeNormal {
                            fan_in: g.kernel_h * g.kernel_w,
                        },
                    ),
                    ParamDecl::new("bias", vec![c], Init::Zeros),
                ]
            }
            LayerKind::PointwiseConv { out_channels } => {
                let cin = in_channels()?;
                vec![
                    ParamDecl::new(
                        "kernel",
                        vec![cin, out_channels],
                        Init::HeNormal { fan_in: cin },
                    ),
                    ParamDecl::new("bias", vec![out_channels], Init::Zeros),
                ]
            }
            LayerKind::Dense { units } => {
                let n = in_channels()?;
                vec![
                    ParamDecl::new("weight", vec![n, units], Init::HeNormal { fan_in: n }),
                    ParamDecl::new("bias", vec![units], Init::Zeros),
                ]
            }
            LayerKind::BatchNorm { .. } => {
                let c = in_channels()?;
                vec![
                    ParamDecl::new("gamma", vec![c], Init::Ones),
                    ParamDecl::new("beta", vec![c], Init::Zeros),
                    ParamDecl::fixed("running_mean", vec![c], Init::Zeros),
                    ParamDecl::fixed("running_var", vec![c], Init::Ones),
                ]
            }
            _ => Vec::new(),
        })
    }

    pub fn forward<T: Scalar>(
        &self,
        inputs: &[&Tensor<T>],
        params: &[&Tensor<T>],
    ) -> Result<Tensor<T>> {
        let x = || -> Result<&Tensor<T>> {
            match inputs {
                [one] => Ok(*one),
                _ => Err(Error::InvalidModel(format!(
                    "{self:?} takes exactly one input, got {}",
                    inputs.len()
                ))),
            }
        };
        let p = |i: usize| -> Result<&Tensor<T>> {
            params
                .get(i)
                .copied()
                .ok_or_else(|| Error::ParamMismatch(format!("{self:?} missing parameter {i}")))
        };
        match *self {
            LayerKind::Conv { geometry, .. } => ops::conv2d(x()?, p(0)?, p(1)?, &geometry),
            LayerKind::DepthwiseConv { geometry } => {
                ops::depthwise_conv2d(x()?, p(0)?, p(1)?, &geometry)
            }
            LayerKind::PointwiseConv { .. } => ops::pointwise_conv2d(x()?, p(0)?, p(1)?),
            LayerKind::Dense { .. } => ops::dense(x()?, p(0)?, p(1)?),
            LayerKind::BatchNorm { eps } => {
                ops::batchnorm_infer(x()?, p(0)?, p(1)?, p(2)?, p(3)?, eps)
            }
            LayerKind::Activation(kind) => Ok(ops::activation(x()?, kind)),
            LayerKind::Pool(kind) => ops::pool(x()?, kind),
            LayerKind::Softmax => ops::softmax(x()?),
            LayerKind::ResidualAdd => ops::add(inputs),
            LayerKind::Concat => ops::concat_channels(inputs),
        }
    }

    /// Backward pass given the cached forward inputs and output.
    pub fn backward<T: Scalar>(
        &self,
        inputs: &[&Tensor<T>],
        output: &Tensor<T>,
        params: &[&Tensor<T>],
        grad_out: &Tensor<T>,
        need_input: bool,
    ) -> Result<LayerGrads<T>> {
        grad_out.expect_shape("backward grad_out", output.shape())?;
        let x = || -> Result<&Tensor<T>> {
            inputs
                .first()
                .copied()
                .ok_or_else(|| Error::InvalidModel("missing layer input".into()))
        };
        let p = |i: usize| -> Result<&Tensor<T>> {
            params
                .get(i)
                .copied()
                .ok_or_else(|| Error::ParamMismatch(format!("{self:?} missing parameter {i}")))
        };
        let kernel_grads = |g: ops::conv::KernelGrads<T>, w: &'static str| LayerGrads {
            grad_inputs: g.input.into_iter().collect(),
            grad_params: vec![(w, g.kernel), ("bias", g.bias)],
        };
        let only_input = |g: Tensor<T>| LayerGrads {
            grad_inputs: if need_input { vec![g] } else { Vec::new() },
            grad_params: Vec::new(),
        };
        Ok(match *self {
            LayerKind::Conv { geometry, .. } => kernel_grads(
                ops::conv2d_backward(x()?, p(0)?, grad_out, &geometry, need_input)?,
                "kernel",
            ),
            LayerKind::DepthwiseConv { geometry } => kernel_grads(
                ops::depthwise_conv2d_backward(x()?, p(0)?, grad_out, &geometry, need_input)?,
                "kernel",
            ),
            LayerKind::PointwiseConv { .. } => kernel_grads(
                ops::pointwise_conv2d_backward(x()?, p(0)?, grad_out, need_input)?,
                "kernel",
            ),
            LayerKind::Dense { .. } => kernel_grads(
                ops::dense_backward(x()?, p(0)?, grad_out, need_input)?,
                "weight",
            ),
            LayerKind::BatchNorm { eps } => {
                let g = ops::batchnorm_backward(
                    x()?,
                    p(0)?,
                    p(1)?,
                    p(2)?,
                    p(3)?,
                    eps,
                    grad_out,
                    need_input,
                )?;
                LayerGrads {
                    grad_inputs: g.input.into_iter().collect(),
                    grad_params: vec![("gamma", g.gamma), ("beta", g.beta)],
                }
            }
            LayerKind::Activation(kind) => {
                only_input(ops::activation_backward(x()?, kind, grad_out)?)
            }
            LayerKind::Pool(kind) => only_input(ops::pool_backward(x()?, kind, grad_out)?),
            LayerKind::Softmax => only_input(ops::softmax_backward(output, grad_out)?),
            LayerKind::ResidualAdd => LayerGrads {
                grad_inputs: if need_input {
                    inputs.iter().map(|_| grad_out.clone()).collect()
                } else {
                    Vec::new()
                },
                grad_params: Vec::new(),
            },
            LayerKind::Concat => LayerGrads {
                grad_inputs: if need_input {
                    let shapes: Vec<&[usize]> = inputs.iter().map(|t| t.shape()).collect();
                    ops::concat_channels_backward(&shapes, grad_out)?
                } else {
                    Vec::new()
                },
                grad_params: Vec::new(),
            },
        })
    }
}

/// A layer plus the state cached by its last forward pass.
#[derive(Clone, Debug)]
pub struct LayerInstance<T> {
    kind: LayerKind,
    cache: Option<(Vec<Tensor<T>>, Tensor<T>)>,
}

impl<T: Scalar> LayerInstance<T> {
    pub fn new(kind: LayerKind) -> Self {
        Self { kind, cache: None }
    }

    pub fn kind(&self) -> &LayerKind {
        &self.kind
    }

    pub fn forward(&mut self, inputs: &[&Tensor<T>], params: &[&Tensor<T>]) -> Result<Tensor<T>> {
        let out = self.kind.forward(inputs, params)?;
        self.cache = Some((inputs.iter().map(|t| (*t).clone()).collect(), out.clone()));
        Ok(out)
    }

    pub fn clear_cache(&mut self) {
        self.cache = None;
    }

    pub fn backward(&self, params: &[&Tensor<T>], grad_out: &Tensor<T>) -> Result<LayerGrads<T>> {
        let (inputs, output) = self.cache.as_ref().ok_or(Error::MissingForwardCache)?;
        let refs: Vec<&Tensor<T>> = inputs.iter().collect();
        self.kind.backward(&refs, output, params, grad_out, true)
    }
}
