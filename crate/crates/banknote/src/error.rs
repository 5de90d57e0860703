use std::io;
use std::path::{Path, PathBuf};

use crate::weights::WeightError;

pub type Result<T, E = AppError> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error(transparent)]
    Core(#[from] banknote_core::Error),
    #[error(transparent)]
    Weights(#[from] WeightError),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("dataset: {0}")]
    Data(String),
    #[error("{}: cannot decode image: {msg}", path.display())]
    Image { path: PathBuf, msg: String },
    #[error("{0}")]
    Usage(String),
    #[error("need at least 2 classes, found {0}")]
    TooFewClasses(usize),
    #[error("report: {0}")]
    Report(String),
}

/// Process exit codes, one per failure category.
pub mod exit {
    pub const OK: u8 = 0;
    pub const FAILURE: u8 = 1;
    pub const USAGE: u8 = 2;
    pub const DATA: u8 = 3;
    pub const CLASS_COUNT: u8 = 4;
    pub const WEIGHT_FORMAT: u8 = 5;
    pub const WEIGHT_MISMATCH: u8 = 6;
    pub const NUMERICAL: u8 = 7;
}

impl AppError {
    pub fn io(path: &Path, source: io::Error) -> Self {
        AppError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn exit_code(&self) -> u8 {
        use banknote_core::Error as E;
        match self {
            AppError::Usage(_) => exit::USAGE,
            AppError::Data(_) | AppError::Image { .. } => exit::DATA,
            AppError::TooFewClasses(_) => exit::CLASS_COUNT,
            AppError::Weights(WeightError::ShapeMismatch(_)) => exit::WEIGHT_MISMATCH,
            AppError::Weights(_) => exit::WEIGHT_FORMAT,
            AppError::Core(e) => match e {
                E::ClassCountMismatch { .. } => exit::CLASS_COUNT,
                E::ParamMismatch(_) | E::FeatureLengthMismatch { .. } => exit::WEIGHT_MISMATCH,
                E::NonFiniteLoss { .. } | E::NegativeVariance { .. } => exit::NUMERICAL,
                E::EmptySplit(_) | E::LabelOutOfRange { .. } => exit::DATA,
                E::InvalidArgument(_) | E::Geometry(_) | E::InvalidModel(_) => exit::USAGE,
                _ => exit::FAILURE,
            },
            AppError::Io { .. } | AppError::Report(_) => exit::FAILURE,
        }
    }
}
