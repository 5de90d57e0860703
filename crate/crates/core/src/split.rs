//! Stratified train/validation/test assignment.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::rng::DetRng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        })
    }
}

impl core::str::FromStr for Split {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(Error::InvalidArgument(format!("unknown split {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SplitRatios {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        Self {
            train: 0.8,
            val: 0.1,
            test: 0.1,
        }
    }
}

impl SplitRatios {
    pub fn new(train: f64, val: f64, test: f64) -> Result<Self> {
        let r = Self { train, val, test };
        r.validate()?;
        Ok(r)
    }

    fn validate(&self) -> Result<()> {
        let parts = [self.train, self.val, self.test];
        if parts.iter().any(|p| !p.is_finite() || *p < 0.0)
            || (parts.iter().sum::<f64>() - 1.0).abs() > 1e-9
        {
            return Err(Error::InvalidArgument(format!(
                "split ratios {parts:?} must be non-negative and sum to 1"
            )));
        }
        Ok(())
    }

    /// `(train, val, test)` counts for a class of `n` items: val and test are
    /// floored, the remainder goes to train.
    pub fn counts(&self, n: usize) -> (usize, usize, usize) {
        let floor = |r: f64| ((n as f64 * r + 1e-9).floor() as usize).min(n);
        let val = floor(self.val);
        let test = floor(self.test).min(n - val);
        (n - val - test, val, test)
    }
}

/// Assigns every item to a split. Within each class the items (in the
/// given order) are shuffled with a class-specific stream of `seed`, then
/// the first `val` go to validation, the next `test` to test, the rest to
/// training.
pub fn stratified_split(
    labels: &[usize],
    num_classes: usize,
    ratios: SplitRatios,
    seed: u64,
) -> Result<Vec<Split>> {
    ratios.validate()?;
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); num_classes];
    for (i, &l) in labels.iter().enumerate() {
        by_class
            .get_mut(l)
            .ok_or(Error::LabelOutOfRange {
                label: l,
                num_classes,
            })?
            .push(i);
    }
    let mut out = vec![Split::Train; labels.len()];
    for (class, mut members) in by_class.into_iter().enumerate() {
        DetRng::derived(seed, &[class as u64]).shuffle(&mut members);
        let (_, val, test) = ratios.counts(members.len());
        for (k, &i) in members.iter().enumerate() {
            out[i] = if k < val {
                Split::Val
            } else if k < val + test {
                Split::Test
            } else {
                Split::Train
            };
        }
    }
    Ok(out)
}
