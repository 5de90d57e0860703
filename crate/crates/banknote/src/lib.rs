//! Filesystem side of the `banknote-core` engine: class-per-directory
//! datasets, the `BNKW` weight format, training history and evaluation
//! reports, synthetic pattern datasets and the `banknote` command line.

pub mod checkpoint;
pub mod cli;
pub mod dataset;
pub mod error;
pub mod history;
pub mod imageio;
pub mod report;
pub mod synth;
pub mod weights;

pub use error::{AppError, Result};
