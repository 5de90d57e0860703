//! Layer graphs, the static shape pass and whole-model forward/backward.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use crate::error::{Error, Result};
use crate::layer::{LayerKind, ParamDecl};
use crate::ops;
use crate::params::ParamStore;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Source of a layer input: the model input or an earlier layer's output.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum NodeRef {
    Input,
    Layer(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayerSpec {
    pub name: String,
    pub kind: LayerKind,
    pub inputs: Vec<NodeRef>,
}

/// Ordered layer graph with a single input and a single output (the last
/// layer). Layers may only consume the model input or earlier layers, so
/// the wiring is acyclic by construction.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelSpec {
    pub input_shape: Vec<usize>,
    pub layers: Vec<LayerSpec>,
    /// Index of the last feature-extractor layer when a head is attached.
    pub backbone_boundary: Option<usize>,
}

impl ModelSpec {
    pub fn new(input_shape: impl Into<Vec<usize>>) -> Self {
        Self {
            input_shape: input_shape.into(),
            layers: Vec::new(),
            backbone_boundary: None,
        }
    }

    pub fn push(
        &mut self,
        name: impl Into<String>,
        kind: LayerKind,
        inputs: &[NodeRef],
    ) -> NodeRef {
        self.layers.push(LayerSpec {
            name: name.into(),
            kind,
            inputs: inputs.to_vec(),
        });
        NodeRef::Layer(self.layers.len() - 1)
    }

    /// Appends a single-input layer fed by `from`.
    pub fn then(&mut self, from: NodeRef, name: impl Into<String>, kind: LayerKind) -> NodeRef {
        self.push(name, kind, &[from])
    }

    pub fn output(&self) -> NodeRef {
        match self.layers.len() {
            0 => NodeRef::Input,
            n => NodeRef::Layer(n - 1),
        }
    }

    /// Last layer index that belongs to the feature extractor.
    pub fn backbone_end(&self) -> Option<usize> {
        self.backbone_boundary
            .or_else(|| self.layers.len().checked_sub(1))
    }

    pub fn layer_index(&self, name: &str) -> Option<usize> {
        self.layers.iter().position(|l| l.name == name)
    }

    pub fn shape_pass(&self) -> Result<ShapePlan> {
        ShapePlan::build(self)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParamInfo {
    /// `"<layer>.<suffix>"`
    pub name: String,
    pub layer: usize,
    pub decl: ParamDecl,
}

/// Result of the static shape pass: every layer's output shape and every
/// declared parameter, in declaration order.
#[derive(Clone, Debug, PartialEq)]
pub struct ShapePlan {
    pub layer_shapes: Vec<Vec<usize>>,
    pub params: Vec<ParamInfo>,
    pub layer_params: Vec<Range<usize>>,
    /// Index of the last layer consuming each layer's output.
    last_use: Vec<usize>,
}

impl ShapePlan {
    fn build(spec: &ModelSpec) -> Result<Self> {
        if spec.layers.is_empty() {
            return Err(Error::InvalidModel("model has no layers".into()));
        }
        if spec.input_shape.is_empty() || spec.input_shape.contains(&0) {
            return Err(Error::InvalidModel(format!(
                "invalid input shape {:?}",
                spec.input_shape
            )));
        }
        let mut names = BTreeSet::new();
        let mut layer_shapes: Vec<Vec<usize>> = Vec::with_capacity(spec.layers.len());
        let mut params = Vec::new();
        let mut layer_params = Vec::with_capacity(spec.layers.len());
        let mut last_use = vec![usize::MAX; spec.layers.len()];
        for (i, layer) in spec.layers.iter().enumerate() {
            if !names.insert(layer.name.as_str()) {
                return Err(Error::InvalidModel(format!(
                    "duplicate layer name {:?}",
                    layer.name
                )));
            }
            if layer.inputs.is_empty() {
                return Err(Error::InvalidModel(format!(
                    "layer {:?} has no inputs",
                    layer.name
                )));
            }
            if !layer.kind.is_multi_input() && layer.inputs.len() != 1 {
                return Err(Error::InvalidModel(format!(
                    "layer {:?} takes one input, wired to {}",
                    layer.name,
                    layer.inputs.len()
                )));
            }
            let mut in_shapes: Vec<&[usize]> = Vec::with_capacity(layer.inputs.len());
            for r in &layer.inputs {
                match *r {
                    NodeRef::Input => in_shapes.push(&spec.input_shape),
                    NodeRef::Layer(j) if j < i => {
                        last_use[j] = i;
                        in_shapes.push(&layer_shapes[j]);
                    }
                    NodeRef::Layer(j) => {
                        return Err(Error::InvalidModel(format!(
                            "layer {:?} reads layer {j}, which is not earlier in the graph",
                            layer.name
                        )))
                    }
                }
            }
            if let Some(b) = spec.backbone_boundary {
                if i > b && !layer.kind.is_head_kind() {
                    return Err(Error::InvalidModel(format!(
                        "layer {:?} after the backbone boundary is not a dense/activation/softmax layer",
                        layer.name
                    )));
                }
            }
            let shape = layer.kind.output_shape(&in_shapes).map_err(|e| match e {
                Error::Geometry(msg) => Error::Geometry(format!("layer {:?}: {msg}", layer.name)),
                other => other,
            })?;
            let start = params.len();
            for decl in layer.kind.params(&in_shapes)? {
                params.push(ParamInfo {
                    name: format!("{}.{}", layer.name, decl.suffix),
                    layer: i,
                    decl,
                });
            }
            layer_params.push(start..params.len());
            layer_shapes.push(shape);
        }
        let n = spec.layers.len();
        if let Some(j) = last_use[..n - 1].iter().position(|&u| u == usize::MAX) {
            return Err(Error::InvalidModel(format!(
                "layer {:?} output is never consumed (models have a single output)",
                spec.layers[j].name
            )));
        }
        if let Some(b) = spec.backbone_boundary {
            if b >= n {
                return Err(Error::InvalidModel(format!(
                    "backbone boundary {b} outside {n} layers"
                )));
            }
        }
        Ok(Self {
            layer_shapes,
            params,
            layer_params,
            last_use,
        })
    }

    pub fn output_shape(&self) -> &[usize] {
        self.layer_shapes.last().map(|s| &s[..]).unwrap_or(&[])
    }
}

/// Per-parameter gradients aligned with the model's parameter order.
/// Non-trainable and frozen parameters have no entry.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients<T> {
    pub grads: Vec<Option<Tensor<T>>>,
}

impl<T: Scalar> Gradients<T> {
    pub fn empty(n: usize) -> Self {
        Self {
            grads: vec![None; n],
        }
    }

    /// Adds `other` into `self`; entries missing on either side are kept.
    pub fn accumulate(&mut self, other: &Gradients<T>) -> Result<()> {
        for (a, b) in self.grads.iter_mut().zip(&other.grads) {
            match (a.as_mut(), b) {
                (Some(a), Some(b)) => a.add_assign(b)?,
                (None, Some(b)) => *a = Some(b.clone()),
                _ => {}
            }
        }
        Ok(())
    }

    pub fn scale(&mut self, factor: T) {
        for g in self.grads.iter_mut().flatten() {
            g.scale(factor);
        }
    }
}

/// All intermediate outputs of one forward pass.
#[derive(Clone, Debug)]
pub struct Trace<T> {
    pub input: Tensor<T>,
    pub outputs: Vec<Tensor<T>>,
}

impl<T: Scalar> Trace<T> {
    pub fn output(&self) -> &Tensor<T> {
        self.outputs.last().expect("non-empty model")
    }
}

/// A validated [`ModelSpec`] together with its shape plan.
#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    spec: ModelSpec,
    plan: ShapePlan,
}

impl Model {
    pub fn new(spec: ModelSpec) -> Result<Self> {
        let plan = spec.shape_pass()?;
        Ok(Self { spec, plan })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn plan(&self) -> &ShapePlan {
        &self.plan
    }

    pub fn into_spec(self) -> ModelSpec {
        self.spec
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.spec.input_shape
    }

    pub fn output_shape(&self) -> &[usize] {
        self.plan.output_shape()
    }

    /// Number of classes when the model ends in a softmax.
    pub fn num_classes(&self) -> Option<usize> {
        match self.spec.layers.last()?.kind {
            LayerKind::Softmax => self.output_shape().first().copied(),
            _ => None,
        }
    }

    /// Total number of scalar parameters (trainable and fixed).
    pub fn param_count(&self) -> usize {
        self.plan
            .params
            .iter()
            .map(|p| p.decl.shape.iter().product::<usize>())
            .sum()
    }

    pub fn trainable_param_count(&self) -> usize {
        self.plan
            .params
            .iter()
            .filter(|p| p.decl.trainable)
            .map(|p| p.decl.shape.iter().product::<usize>())
            .sum()
    }

    fn check_params<T: Scalar>(&self, params: &ParamStore<T>) -> Result<()> {
        if params.len() != self.plan.params.len()
            || params
                .entries()
                .iter()
                .zip(&self.plan.params)
                .any(|(e, p)| e.name != p.name)
        {
            return Err(Error::ParamMismatch(
                "parameter store was not built for this model".into(),
            ));
        }
        Ok(())
    }

    fn layer_param_refs<'a, T: Scalar>(
        &self,
        params: &'a ParamStore<T>,
        i: usize,
    ) -> Vec<&'a Tensor<T>> {
        params.entries()[self.plan.layer_params[i].clone()]
            .iter()
            .map(|e| &e.tensor)
            .collect()
    }

    fn check_input<T: Scalar>(&self, input: &Tensor<T>) -> Result<()> {
        input.expect_shape("model input", &self.spec.input_shape)
    }

    /// Inference forward pass; intermediate outputs are dropped after their
    /// last use.
    pub fn forward<T: Scalar>(
        &self,
        params: &ParamStore<T>,
        input: &Tensor<T>,
    ) -> Result<Tensor<T>> {
        self.check_params(params)?;
        self.check_input(input)?;
        let n = self.spec.layers.len();
        let mut outputs: Vec<Option<Tensor<T>>> = vec![None; n];
        for (i, layer) in self.spec.layers.iter().enumerate() {
            let out = {
                let ins: Vec<&Tensor<T>> = layer
                    .inputs
                    .iter()
                    .map(|r| match *r {
                        NodeRef::Input => input,
                        NodeRef::Layer(j) => outputs[j].as_ref().expect("live activation"),
                    })
                    .collect();
                layer
                    .kind
                    .forward(&ins, &self.layer_param_refs(params, i))?
            };
            for r in &layer.inputs {
                if let NodeRef::Layer(j) = *r {
                    if self.plan.last_use[j] == i {
                        outputs[j] = None;
                    }
                }
            }
            outputs[i] = Some(out);
        }
        Ok(outputs.pop().flatten().expect("model output"))
    }

    /// Forward pass keeping every intermediate output for [`Model::backward`].
    pub fn forward_trace<T: Scalar>(
        &self,
        params: &ParamStore<T>,
        input: &Tensor<T>,
    ) -> Result<Trace<T>> {
        self.check_params(params)?;
        self.check_input(input)?;
        let mut outputs: Vec<Tensor<T>> = Vec::with_capacity(self.spec.layers.len());
        for (i, layer) in self.spec.layers.iter().enumerate() {
            let out = {
                let ins: Vec<&Tensor<T>> = layer
                    .inputs
                    .iter()
                    .map(|r| match *r {
                        NodeRef::Input => input,
                        NodeRef::Layer(j) => &outputs[j],
                    })
                    .collect();
                layer
                    .kind
                    .forward(&ins, &self.layer_param_refs(params, i))?
            };
            outputs.push(out);
        }
        Ok(Trace {
            input: input.clone(),
            outputs,
        })
    }

    /// Layers whose output gradient is needed: the layer itself or
    /// something upstream of it has unfrozen trainable parameters.
    fn active_layers<T: Scalar>(&self, params: &ParamStore<T>) -> Vec<bool> {
        let mut active = vec![false; self.spec.layers.len()];
        for (i, layer) in self.spec.layers.iter().enumerate() {
            let own = self.plan.layer_params[i]
                .clone()
                .any(|p| self.plan.params[p].decl.trainable && !params.is_frozen_index(p));
            let upstream = layer.inputs.iter().any(|r| match *r {
                NodeRef::Layer(j) => active[j],
                NodeRef::Input => false,
            });
            active[i] = own || upstream;
        }
        active
    }

    /// Backpropagates `grad_output` (gradient of the loss with respect to
    /// the model output) through the traced forward pass.
    pub fn backward<T: Scalar>(
        &self,
        params: &ParamStore<T>,
        trace: &Trace<T>,
        grad_output: &Tensor<T>,
    ) -> Result<Gradients<T>> {
        let last = self.spec.layers.len() - 1;
        grad_output.expect_shape("model grad_output", self.output_shape())?;
        self.backward_from(params, trace, last, grad_output.clone())
    }

    /// Backward starting at layer `start` with the gradient of its output.
    pub fn backward_from<T: Scalar>(
        &self,
        params: &ParamStore<T>,
        trace: &Trace<T>,
        start: usize,
        grad: Tensor<T>,
    ) -> Result<Gradients<T>> {
        self.check_params(params)?;
        if trace.outputs.len() != self.spec.layers.len() {
            return Err(Error::MissingForwardCache);
        }
        let active = self.active_layers(params);
        let mut grads = Gradients::empty(self.plan.params.len());
        let mut node_grads: Vec<Option<Tensor<T>>> = vec![None; self.spec.layers.len()];
        node_grads[start] = Some(grad);
        for i in (0..=start).rev() {
            if !active[i] {
                continue;
            }
            let Some(g) = node_grads[i].take() else {
                continue;
            };
            let layer = &self.spec.layers[i];
            let ins: Vec<&Tensor<T>> = layer
                .inputs
                .iter()
                .map(|r| match *r {
                    NodeRef::Input => &trace.input,
                    NodeRef::Layer(j) => &trace.outputs[j],
                })
                .collect();
            let need_input = layer
                .inputs
                .iter()
                .any(|r| matches!(*r, NodeRef::Layer(j) if active[j]));
            let lg = layer.kind.backward(
                &ins,
                &trace.outputs[i],
                &self.layer_param_refs(params, i),
                &g,
                need_input,
            )?;
            for p in self.plan.layer_params[i].clone() {
                let info = &self.plan.params[p];
                if !info.decl.trainable || params.is_frozen_index(p) {
                    continue;
                }
                grads.grads[p] = lg.param(info.decl.suffix).cloned();
            }
            for (r, gi) in layer.inputs.iter().zip(lg.grad_inputs) {
                if let NodeRef::Layer(j) = *r {
                    if !active[j] {
                        continue;
                    }
                    match node_grads[j].as_mut() {
                        Some(acc) => acc.add_assign(&gi)?,
                        None => node_grads[j] = Some(gi),
                    }
                }
            }
        }
        Ok(grads)
    }

    /// Cross-entropy loss, class probabilities and parameter gradients for
    /// one labelled example. A trailing softmax is differentiated through
    /// the fused `p − y` form.
    pub fn loss_and_grads<T: Scalar>(
        &self,
        params: &ParamStore<T>,
        input: &Tensor<T>,
        label: usize,
    ) -> Result<(T, Tensor<T>, Gradients<T>)> {
        let classes = self.num_classes().ok_or_else(|| {
            Error::InvalidModel("training requires a model ending in softmax".into())
        })?;
        if label >= classes {
            return Err(Error::LabelOutOfRange {
                label,
                num_classes: classes,
            });
        }
        let trace = self.forward_trace(params, input)?;
        let probs = trace.output().clone();
        let y = ops::one_hot::<T>(label, classes);
        let loss = ops::cross_entropy(&probs, &y)?;
        let softmax_input = self.spec.layers.last().map(|l| l.inputs[0]);
        let grads = match softmax_input {
            Some(NodeRef::Layer(j)) => {
                let g = ops::softmax_cross_entropy_backward(&probs, &y)?;
                self.backward_from(params, &trace, j, g)?
            }
            _ => Gradients::empty(self.plan.params.len()),
        };
        Ok((loss, probs, grads))
    }
}
