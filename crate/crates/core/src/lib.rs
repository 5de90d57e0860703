//! Lightweight convolutional network engine for transfer learning on small
//! image classification datasets.
//!
//! Everything here is pure computation over owned buffers: tensors and the
//! per-layer forward/backward math, the three backbone families
//! (depthwise-separable, pre-activation residual, normal/reduction cells),
//! the dense classifier head, the affine augmentation pipeline, the Adam +
//! reduce-on-plateau training loop and the evaluation metrics.
//!
//! File formats, image decoding and the command line live in the companion
//! `banknote` crate.
//!
//! ## Features
//!
//! - `std`: links the standard library (implied by `parallel`).
//! - `parallel`: computes per-example gradients of a batch on the rayon pool.
//!   Reduction order is fixed, so results do not depend on the worker count.

#![cfg_attr(not(any(feature = "std", test)), no_std)]

extern crate alloc;

pub mod augment;
pub mod error;
pub mod image;
pub mod layer;
pub mod metrics;
pub mod model;
pub mod ops;
pub mod optim;
pub mod params;
pub mod rng;
pub mod scalar;
pub mod split;
pub mod tensor;
pub mod train;
pub mod zoo;

pub use error::{Error, Result};
pub use layer::{LayerGrads, LayerInstance, LayerKind};
pub use model::{LayerSpec, Model, ModelSpec, NodeRef};
pub use params::{FreezeScope, ParamStore};
pub use scalar::Scalar;
pub use tensor::Tensor;
