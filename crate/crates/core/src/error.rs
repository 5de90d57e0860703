use alloc::string::String;
use alloc::vec::Vec;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("{op}: shape mismatch, {left:?} vs {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },
    #[error("tensor data length {len} does not match shape {shape:?}")]
    DataLength { shape: Vec<usize>, len: usize },
    #[error("invalid geometry: {0}")]
    Geometry(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("negative variance {value} in channel {channel}")]
    NegativeVariance { channel: usize, value: f64 },
    #[error("backward called without a cached forward pass")]
    MissingForwardCache,
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("feature length mismatch: backbone produces {backbone}, head expects {head}")]
    FeatureLengthMismatch { backbone: usize, head: usize },
    #[error("parameter mismatch: {0}")]
    ParamMismatch(String),
    #[error("model has {model} output classes but the dataset has {dataset}")]
    ClassCountMismatch { model: usize, dataset: usize },
    #[error("empty {0} split")]
    EmptySplit(&'static str),
    #[error("non-finite loss in epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },
    #[error("label {label} out of range for {num_classes} classes")]
    LabelOutOfRange { label: usize, num_classes: usize },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

impl Error {
    pub(crate) fn shape(op: &'static str, left: &[usize], right: &[usize]) -> Self {
        Error::ShapeMismatch {
            op,
            left: left.to_vec(),
            right: right.to_vec(),
        }
    }
}
