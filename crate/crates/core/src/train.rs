//! Training loop: Adam on averaged cross-entropy batches, reduce-on-plateau
//! learning rate, early stopping and best-checkpoint tracking on the
//! validation loss.

use alloc::format;
use alloc::vec::Vec;
use core::ops::ControlFlow;

use crate::augment::{self, AugmentConfig};
use crate::error::{Error, Result};
use crate::metrics::argmax;
use crate::model::{Gradients, Model};
use crate::ops;
use crate::optim::{AdamConfig, AdamState};
use crate::params::{FreezeScope, ParamStore};
use crate::rng::{derive_seed, DetRng};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Examples per reduction chunk. Gradients are summed inside a chunk and
/// then across chunks, always in index order.
const CHUNK: usize = 4;

const SHUFFLE_STREAM: u64 = 0x5348_5546;
const AUGMENT_STREAM: u64 = 0x4155_474d;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub plateau_patience: usize,
    pub plateau_factor: f64,
    pub min_lr: f64,
    /// Improvement threshold: a loss counts as better when `< best − min_delta`.
    pub min_delta: f64,
    pub early_stop_patience: usize,
    pub seed: u64,
    pub freeze_backbone: bool,
    pub adam: AdamConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            batch_size: 32,
            max_epochs: 50,
            plateau_patience: 2,
            plateau_factor: 0.8,
            min_lr: 1e-7,
            min_delta: 0.0,
            early_stop_patience: 10,
            seed: 0,
            freeze_backbone: false,
            adam: AdamConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidArgument(format!("train config: {msg}")));
        if !(self.plateau_factor > 0.0 && self.plateau_factor < 1.0) {
            return bad("plateau factor must be in (0, 1)");
        }
        if self.plateau_patience == 0 || self.early_stop_patience == 0 {
            return bad("patience must be ≥ 1");
        }
        if self.batch_size == 0 {
            return bad("batch size must be ≥ 1");
        }
        if self.max_epochs == 0 {
            return bad("max epochs must be ≥ 1");
        }
        let non_negative = |v: f64| v >= 0.0 && !v.is_nan();
        if !(non_negative(self.learning_rate)
            && self.learning_rate.is_finite()
            && non_negative(self.min_lr))
        {
            return bad("learning rates must be finite and non-negative");
        }
        if !non_negative(self.min_delta) {
            return bad("min delta must be non-negative");
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    /// Learning rate used during this epoch.
    pub lr: f64,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_loss: f64,
    pub val_acc: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainState {
    pub lr: f64,
    pub plateau_patience: usize,
    pub plateau_factor: f64,
    pub min_lr: f64,
    pub min_delta: f64,
    /// Epochs since the last improvement, reset on each reduction.
    pub plateau_wait: usize,
    /// Epochs since the last improvement (early stopping).
    pub since_best: usize,
    pub best_val_loss: f64,
    pub best_epoch: Option<usize>,
    /// Whether the most recent epoch improved on the best loss.
    pub improved: bool,
    pub epochs_seen: usize,
    pub checkpoint_epoch: Option<usize>,
    pub history: Vec<EpochRecord>,
}

impl TrainState {
    pub fn new(config: &TrainConfig) -> Self {
        Self {
            lr: config.learning_rate,
            plateau_patience: config.plateau_patience,
            plateau_factor: config.plateau_factor,
            min_lr: config.min_lr,
            min_delta: config.min_delta,
            plateau_wait: 0,
            since_best: 0,
            best_val_loss: f64::INFINITY,
            best_epoch: None,
            improved: false,
            epochs_seen: 0,
            checkpoint_epoch: None,
            history: Vec::new(),
        }
    }

    /// Records one epoch's validation loss. A strict improvement resets
    /// both counters; otherwise they grow, and when the plateau counter
    /// reaches the patience the learning rate is multiplied by the factor
    /// (floored at `min_lr`) and the counter restarts.
    pub fn plateau_update(&mut self, val_loss: f64) {
        self.epochs_seen += 1;
        self.improved = val_loss < self.best_val_loss - self.min_delta;
        if self.improved {
            self.best_val_loss = val_loss;
            self.best_epoch = Some(self.epochs_seen);
            self.plateau_wait = 0;
            self.since_best = 0;
        } else {
            self.plateau_wait += 1;
            self.since_best += 1;
            if self.plateau_wait >= self.plateau_patience {
                self.lr = (self.lr * self.plateau_factor).max(self.min_lr);
                self.plateau_wait = 0;
            }
        }
    }
}

pub fn plateau_update(mut state: TrainState, val_loss: f64) -> TrainState {
    state.plateau_update(val_loss);
    state
}

/// True once `patience` epochs have passed without improvement.
pub fn early_stop_check(state: &TrainState, patience: usize) -> bool {
    state.since_best >= patience
}

/// Destination for best-so-far parameters.
pub trait CheckpointSink<T> {
    fn save(&mut self, params: &ParamStore<T>, epoch: usize) -> Result<()>;
    fn load(&mut self, model: &Model) -> Result<ParamStore<T>>;
}

/// Keeps the checkpoint in memory.
#[derive(Clone, Debug, Default)]
pub struct MemoryCheckpoint<T> {
    pub params: Option<ParamStore<T>>,
    pub epoch: Option<usize>,
    pub writes: usize,
}

impl<T: Scalar> MemoryCheckpoint<T> {
    pub fn new() -> Self {
        Self {
            params: None,
            epoch: None,
            writes: 0,
        }
    }
}

impl<T: Scalar> CheckpointSink<T> for MemoryCheckpoint<T> {
    fn save(&mut self, params: &ParamStore<T>, epoch: usize) -> Result<()> {
        self.params = Some(params.clone());
        self.epoch = Some(epoch);
        self.writes += 1;
        Ok(())
    }

    fn load(&mut self, _model: &Model) -> Result<ParamStore<T>> {
        self.params
            .clone()
            .ok_or_else(|| Error::Checkpoint("no checkpoint written".into()))
    }
}

/// Persists `params` when the last recorded epoch improved the best loss.
pub fn checkpoint_if_best<T: Scalar, S: CheckpointSink<T> + ?Sized>(
    state: &mut TrainState,
    params: &ParamStore<T>,
    sink: &mut S,
) -> Result<()> {
    if state.improved {
        let epoch = state.best_epoch.unwrap_or(state.epochs_seen);
        sink.save(params, epoch)?;
        state.checkpoint_epoch = Some(epoch);
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sample<T> {
    pub image: Tensor<T>,
    pub label: usize,
}

impl<T> Sample<T> {
    pub fn new(image: Tensor<T>, label: usize) -> Self {
        Self { image, label }
    }
}

pub struct TrainData<'a, T> {
    pub train: &'a [Sample<T>],
    pub val: &'a [Sample<T>],
    pub num_classes: usize,
}

#[derive(Clone, Debug)]
pub struct FitOutcome<T> {
    /// Parameters reloaded from the best checkpoint.
    pub params: ParamStore<T>,
    pub state: TrainState,
}

struct ChunkResult<T> {
    loss: f64,
    correct: usize,
    grads: Gradients<T>,
}

fn chunk_grads<T: Scalar>(
    model: &Model,
    params: &ParamStore<T>,
    items: &[(usize, &Sample<T>)],
    augment: Option<(&AugmentConfig, u64, u64)>,
) -> Result<ChunkResult<T>> {
    let mut acc = ChunkResult {
        loss: 0.0,
        correct: 0,
        grads: Gradients::empty(params.len()),
    };
    for &(index, sample) in items {
        let (loss, probs, grads) = match augment {
            Some((cfg, seed, epoch)) => {
                let img = augment::augment_one(&sample.image, cfg, seed, index as u64, epoch)?;
                model.loss_and_grads(params, &img, sample.label)?
            }
            None => model.loss_and_grads(params, &sample.image, sample.label)?,
        };
        acc.loss += loss.as_f64();
        acc.correct += usize::from(argmax(probs.data()) == sample.label);
        acc.grads.accumulate(&grads)?;
    }
    Ok(acc)
}

#[cfg(feature = "parallel")]
fn map_chunks<I: Sync, R: Send>(items: &[I], f: impl Fn(&[I]) -> R + Sync + Send) -> Vec<R> {
    use rayon::prelude::*;
    items.par_chunks(CHUNK).map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn map_chunks<I, R>(items: &[I], f: impl Fn(&[I]) -> R) -> Vec<R> {
    items.chunks(CHUNK).map(f).collect()
}

/// Summed loss, number correct and averaged gradients of one batch.
fn batch_step<T: Scalar>(
    model: &Model,
    params: &ParamStore<T>,
    batch: &[(usize, &Sample<T>)],
    augment: Option<(&AugmentConfig, u64, u64)>,
) -> Result<(f64, usize, Gradients<T>)> {
    let parts = map_chunks(batch, |chunk| chunk_grads(model, params, chunk, augment));
    let mut loss = 0.0;
    let mut correct = 0;
    let mut grads = Gradients::empty(params.len());
    for part in parts {
        let part = part?;
        loss += part.loss;
        correct += part.correct;
        grads.accumulate(&part.grads)?;
    }
    grads.scale(T::one() / T::from_usize(batch.len()));
    Ok((loss, correct, grads))
}

/// Mean loss, number of correct predictions and mean gradients over
/// `samples`, without augmentation.
pub fn batch_gradients<T: Scalar>(
    model: &Model,
    params: &ParamStore<T>,
    samples: &[Sample<T>],
) -> Result<(f64, usize, Gradients<T>)> {
    if samples.is_empty() {
        return Err(Error::EmptySplit("batch"));
    }
    let batch: Vec<(usize, &Sample<T>)> = samples.iter().enumerate().collect();
    let (loss, correct, grads) = batch_step(model, params, &batch, None)?;
    Ok((loss / samples.len() as f64, correct, grads))
}

/// Class probabilities for each sample, in order.
pub fn predict_all<T: Scalar>(
    model: &Model,
    params: &ParamStore<T>,
    samples: &[Sample<T>],
) -> Result<Vec<Tensor<T>>> {
    let parts = map_chunks(samples, |chunk| {
        chunk
            .iter()
            .map(|s| model.forward(params, &s.image))
            .collect::<Result<Vec<_>>>()
    });
    let mut out = Vec::with_capacity(samples.len());
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}

/// Mean cross-entropy and accuracy on un-augmented samples.
pub fn evaluate<T: Scalar>(
    model: &Model,
    params: &ParamStore<T>,
    samples: &[Sample<T>],
) -> Result<(f64, f64)> {
    if samples.is_empty() {
        return Err(Error::EmptySplit("evaluation"));
    }
    let classes = model
        .num_classes()
        .ok_or_else(|| Error::InvalidModel("evaluation requires a softmax output".into()))?;
    let probs = predict_all(model, params, samples)?;
    let mut loss = 0.0;
    let mut correct = 0;
    for (p, s) in probs.iter().zip(samples) {
        if s.label >= classes {
            return Err(Error::LabelOutOfRange {
                label: s.label,
                num_classes: classes,
            });
        }
        loss += ops::cross_entropy(p, &ops::one_hot(s.label, classes))?.as_f64();
        correct += usize::from(argmax(p.data()) == s.label);
    }
    let n = samples.len() as f64;
    Ok((loss / n, correct as f64 / n))
}

pub fn fit<T: Scalar, S: CheckpointSink<T> + ?Sized>(
    model: &Model,
    params: ParamStore<T>,
    data: &TrainData<'_, T>,
    augment: Option<&AugmentConfig>,
    config: &TrainConfig,
    sink: &mut S,
) -> Result<FitOutcome<T>> {
    fit_with(model, params, data, augment, config, sink, |_| {
        ControlFlow::Continue(())
    })
}

/// [`fit`] with a callback invoked after every epoch; returning
/// `ControlFlow::Break` ends training after that epoch.
pub fn fit_with<T: Scalar, S: CheckpointSink<T> + ?Sized>(
    model: &Model,
    mut params: ParamStore<T>,
    data: &TrainData<'_, T>,
    augment: Option<&AugmentConfig>,
    config: &TrainConfig,
    sink: &mut S,
    mut on_epoch: impl FnMut(&EpochRecord) -> ControlFlow<()>,
) -> Result<FitOutcome<T>> {
    config.validate()?;
    if let Some(a) = augment {
        a.validate()?;
    }
    let classes = model
        .num_classes()
        .ok_or_else(|| Error::InvalidModel("training requires a softmax output".into()))?;
    if classes != data.num_classes {
        return Err(Error::ClassCountMismatch {
            model: classes,
            dataset: data.num_classes,
        });
    }
    if data.train.is_empty() {
        return Err(Error::EmptySplit("train"));
    }
    if data.val.is_empty() {
        return Err(Error::EmptySplit("validation"));
    }
    if let Some(s) = data
        .train
        .iter()
        .chain(data.val)
        .find(|s| s.label >= classes)
    {
        return Err(Error::LabelOutOfRange {
            label: s.label,
            num_classes: classes,
        });
    }
    let scope = if config.freeze_backbone {
        FreezeScope::Backbone
    } else {
        FreezeScope::None
    };
    params.set_frozen(model.spec(), scope);
    let mut adam = AdamState::new(&params, config.adam);
    let mut state = TrainState::new(config);
    let augment_seed = derive_seed(config.seed, AUGMENT_STREAM);
    let mut order: Vec<usize> = (0..data.train.len()).collect();

    for epoch in 1..=config.max_epochs {
        DetRng::derived(config.seed, &[SHUFFLE_STREAM, epoch as u64]).shuffle(&mut order);
        let lr = state.lr;
        let mut loss_sum = 0.0;
        let mut correct = 0;
        for (b, idx) in order.chunks(config.batch_size).enumerate() {
            let batch: Vec<(usize, &Sample<T>)> =
                idx.iter().map(|&i| (i, &data.train[i])).collect();
            let aug = augment.map(|a| (a, augment_seed, epoch as u64));
            let (loss, ok, grads) = batch_step(model, &params, &batch, aug)?;
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, batch: b });
            }
            loss_sum += loss;
            correct += ok;
            adam.step(&mut params, &grads, lr)?;
        }
        let n = data.train.len() as f64;
        let (val_loss, val_acc) = evaluate(model, &params, data.val)?;
        if !val_loss.is_finite() {
            return Err(Error::NonFiniteLoss {
                epoch,
                batch: usize::MAX,
            });
        }
        state.plateau_update(val_loss);
        checkpoint_if_best(&mut state, &params, sink)?;
        let record = EpochRecord {
            epoch,
            lr,
            train_loss: loss_sum / n,
            train_acc: correct as f64 / n,
            val_loss,
            val_acc,
        };
        state.history.push(record);
        if on_epoch(&record).is_break() || early_stop_check(&state, config.early_stop_patience) {
            break;
        }
    }
    let best = sink.load(model)?.with_frozen(model.spec(), scope);
    Ok(FitOutcome {
        params: best,
        state,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn state() -> TrainState {
        TrainState::new(&TrainConfig::default())
    }

    #[test]
    fn improving_then_stagnant() {
        let mut s = state();
        s.plateau_update(1.0);
        s.plateau_update(0.9);
        assert_eq!(s.lr, 1e-4);
        assert_eq!(s.best_val_loss, 0.9);
        s.plateau_update(0.995);
        assert_eq!(s.lr, 1e-4);
        s.plateau_update(0.996);
        assert!((s.lr - 8e-5).abs() < 1e-18);
        assert_eq!(s.plateau_wait, 0);
    }

    #[test]
    fn equal_loss_is_not_improvement() {
        let mut s = state();
        s.plateau_update(0.5);
        s.plateau_update(0.5);
        assert!(!s.improved);
        assert_eq!(s.since_best, 1);
    }

    #[test]
    fn flat_losses_stop_after_patience() {
        let mut s = state();
        let mut stopped_at = None;
        for e in 1..=10 {
            s.plateau_update(1.0);
            if early_stop_check(&s, 3) {
                stopped_at = Some(e);
                break;
            }
        }
        assert_eq!(stopped_at, Some(4));
    }

    #[test]
    fn lr_floor() {
        let cfg = TrainConfig {
            min_lr: 5e-5,
            ..TrainConfig::default()
        };
        let mut s = TrainState::new(&cfg);
        s.plateau_update(1.0);
        for _ in 0..40 {
            s.plateau_update(2.0);
        }
        assert_eq!(s.lr, 5e-5);
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        for bad in [
            TrainConfig {
                plateau_factor: 1.0,
                ..TrainConfig::default()
            },
            TrainConfig {
                batch_size: 0,
                ..TrainConfig::default()
            },
            TrainConfig {
                plateau_patience: 0,
                ..TrainConfig::default()
            },
        ] {
            assert!(bad.validate().is_err());
        }
    }
}
