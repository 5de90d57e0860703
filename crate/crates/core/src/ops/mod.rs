//! Forward and backward kernels for every layer primitive.
//!
//! Each `*_backward` takes the forward inputs (and output where useful) and
//! the gradient of the loss with respect to the output.

pub mod activation;
pub mod conv;
pub mod dense;
mod gemm;
pub mod geometry;
pub mod merge;
pub mod norm;
pub mod pool;
pub mod softmax;

pub use activation::{activation, activation_backward, ActivationKind};
pub use conv::{
    conv2d, conv2d_backward, conv2d_direct, depthwise_conv2d, depthwise_conv2d_backward,
    pointwise_conv2d, pointwise_conv2d_backward,
};
pub use dense::{dense, dense_backward};
pub use geometry::{ConvGeometry, Padding};
pub use merge::{add, concat_channels, concat_channels_backward};
pub use norm::{batchnorm_backward, batchnorm_infer, DEFAULT_BN_EPS};
pub use pool::{pool, pool_backward, PoolKind};
pub use softmax::{
    cross_entropy, one_hot, softmax, softmax_backward, softmax_cross_entropy_backward, LOG_CLIP,
};
