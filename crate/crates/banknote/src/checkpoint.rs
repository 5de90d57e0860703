//! Best-so-far checkpoints written to a weight file.

use std::path::{Path, PathBuf};

use banknote_core::train::CheckpointSink;
use banknote_core::{Error, Model, ParamStore};

use crate::weights;

/// Rewrites `path` on every save; the file always holds the last saved
/// parameters.
#[derive(Clone, Debug)]
pub struct FileCheckpoint {
    pub path: PathBuf,
    pub epoch: Option<usize>,
    pub writes: usize,
}

impl FileCheckpoint {
    pub fn new(path: impl AsRef<Path>) -> Self {
        Self {
            path: path.as_ref().to_path_buf(),
            epoch: None,
            writes: 0,
        }
    }
}

impl CheckpointSink<f32> for FileCheckpoint {
    fn save(&mut self, params: &ParamStore<f32>, epoch: usize) -> Result<(), Error> {
        weights::save_weights(params, &self.path).map_err(|e| Error::Checkpoint(e.to_string()))?;
        self.epoch = Some(epoch);
        self.writes += 1;
        Ok(())
    }

    fn load(&mut self, model: &Model) -> Result<ParamStore<f32>, Error> {
        weights::load_params(model, &self.path).map_err(|e| Error::Checkpoint(e.to_string()))
    }
}
