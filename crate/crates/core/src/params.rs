//! Named parameter tensors of a model, with per-layer freezing.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::layer::Init;
use crate::model::{Model, ModelSpec};
use crate::rng::DetRng;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq)]
pub struct ParamEntry<T> {
    /// `"<layer>.<suffix>"`
    pub name: String,
    pub layer: String,
    pub trainable: bool,
    pub tensor: Tensor<T>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FreezeScope {
    /// Every layer at or before the backbone boundary.
    Backbone,
    None,
}

/// Parameter tensors in model declaration order plus the set of frozen
/// layer names.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamStore<T = f32> {
    entries: Vec<ParamEntry<T>>,
    index: BTreeMap<String, usize>,
    frozen: BTreeSet<String>,
}

impl<T: Scalar> ParamStore<T> {
    /// Fresh parameters: He-normal kernels, zero biases, unit batch-norm
    /// scale and variance.
    pub fn init(model: &Model, seed: u64) -> Self {
        let mut rng = DetRng::new(seed);
        let entries = model
            .plan()
            .params
            .iter()
            .map(|p| {
                let tensor = match p.decl.init {
                    Init::Zeros => Tensor::zeros(p.decl.shape.clone()),
                    Init::Ones => Tensor::full(p.decl.shape.clone(), T::one()),
                    Init::HeNormal { fan_in } => {
                        let std = num_traits::Float::sqrt(2.0 / fan_in.max(1) as f64);
                        Tensor::from_fn(p.decl.shape.clone(), |_| T::of_f64(rng.normal() * std))
                    }
                };
                ParamEntry {
                    name: p.name.clone(),
                    layer: model.spec().layers[p.layer].name.clone(),
                    trainable: p.decl.trainable,
                    tensor,
                }
            })
            .collect();
        Self::from_entries(entries)
    }

    fn from_entries(entries: Vec<ParamEntry<T>>) -> Self {
        let index = entries
            .iter()
            .enumerate()
            .map(|(i, e)| (e.name.clone(), i))
            .collect();
        Self {
            entries,
            index,
            frozen: BTreeSet::new(),
        }
    }

    /// Builds a store from named tensors, which must cover exactly the
    /// model's declared parameters with matching shapes.
    pub fn from_named(
        model: &Model,
        named: impl IntoIterator<Item = (String, Tensor<T>)>,
    ) -> Result<Self> {
        let mut map: BTreeMap<String, Tensor<T>> = BTreeMap::new();
        for (name, t) in named {
            if map.insert(name.clone(), t).is_some() {
                return Err(Error::ParamMismatch(format!("duplicate tensor {name:?}")));
            }
        }
        let mut entries = Vec::with_capacity(model.plan().params.len());
        for p in &model.plan().params {
            let tensor = map
                .remove(&p.name)
                .ok_or_else(|| Error::ParamMismatch(format!("missing tensor {:?}", p.name)))?;
            if tensor.shape() != &p.decl.shape[..] {
                return Err(Error::ParamMismatch(format!(
                    "tensor {:?} has shape {:?}, model expects {:?}",
                    p.name,
                    tensor.shape(),
                    p.decl.shape
                )));
            }
            entries.push(ParamEntry {
                name: p.name.clone(),
                layer: model.spec().layers[p.layer].name.clone(),
                trainable: p.decl.trainable,
                tensor,
            });
        }
        if let Some(extra) = map.keys().next() {
            return Err(Error::ParamMismatch(format!(
                "tensor {extra:?} is not a parameter of this model"
            )));
        }
        Ok(Self::from_entries(entries))
    }

    /// Overwrites the parameters of layers in `scope` with tensors from
    /// `named`. With [`FreezeScope::Backbone`] only backbone tensors are
    /// required and others are ignored; with [`FreezeScope::None`] every
    /// parameter must be present.
    pub fn load_from(
        &mut self,
        model: &Model,
        named: impl IntoIterator<Item = (String, Tensor<T>)>,
        scope: FreezeScope,
    ) -> Result<()> {
        let map: BTreeMap<String, Tensor<T>> = named.into_iter().collect();
        let end = model.spec().backbone_end();
        for (i, p) in model.plan().params.iter().enumerate() {
            let wanted = match scope {
                FreezeScope::None => true,
                FreezeScope::Backbone => end.is_some_and(|b| p.layer <= b),
            };
            if !wanted {
                continue;
            }
            let t = map
                .get(&p.name)
                .ok_or_else(|| Error::ParamMismatch(format!("missing tensor {:?}", p.name)))?;
            if t.shape() != &p.decl.shape[..] {
                return Err(Error::ParamMismatch(format!(
                    "tensor {:?} has shape {:?}, model expects {:?}",
                    p.name,
                    t.shape(),
                    p.decl.shape
                )));
            }
            self.entries[i].tensor = t.clone();
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[ParamEntry<T>] {
        &self.entries
    }

    pub fn get(&self, name: &str) -> Option<&Tensor<T>> {
        self.index.get(name).map(|&i| &self.entries[i].tensor)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor<T>> {
        self.index.get(name).map(|&i| &mut self.entries[i].tensor)
    }

    pub fn tensor_mut(&mut self, i: usize) -> &mut Tensor<T> {
        &mut self.entries[i].tensor
    }

    pub fn named(&self) -> impl Iterator<Item = (&str, &Tensor<T>)> {
        self.entries.iter().map(|e| (e.name.as_str(), &e.tensor))
    }

    pub fn frozen_layers(&self) -> &BTreeSet<String> {
        &self.frozen
    }

    pub fn is_frozen_index(&self, i: usize) -> bool {
        self.frozen.contains(&self.entries[i].layer)
    }

    /// True when entry `i` may be changed by an optimizer.
    pub fn is_updatable(&self, i: usize) -> bool {
        self.entries[i].trainable && !self.is_frozen_index(i)
    }

    pub fn set_frozen(&mut self, spec: &ModelSpec, scope: FreezeScope) {
        self.frozen.clear();
        if scope == FreezeScope::Backbone {
            if let Some(end) = spec.backbone_end() {
                self.frozen
                    .extend(spec.layers[..=end].iter().map(|l| l.name.clone()));
            }
        }
    }

    pub fn with_frozen(mut self, spec: &ModelSpec, scope: FreezeScope) -> Self {
        self.set_frozen(spec, scope);
        self
    }

    pub fn cast<U: Scalar>(&self) -> ParamStore<U> {
        ParamStore {
            entries: self
                .entries
                .iter()
                .map(|e| ParamEntry {
                    name: e.name.clone(),
                    layer: e.layer.clone(),
                    trainable: e.trainable,
                    tensor: e.tensor.cast(),
                })
                .collect(),
            index: self.index.clone(),
            frozen: self.frozen.clone(),
        }
    }
}
