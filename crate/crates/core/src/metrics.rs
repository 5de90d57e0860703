//! Confusion matrix and the precision / recall / F1 / accuracy report derived
//! from it, per class and macro-averaged.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Index of the largest value; ties resolve to the lowest index.
pub fn argmax<T: PartialOrd>(values: &[T]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// `K×K` counts, rows = true class, columns = predicted class.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfusionMatrix {
    k: usize,
    counts: Vec<u64>,
    class_names: Vec<String>,
}

impl ConfusionMatrix {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            counts: vec![0; k * k],
            class_names: (0..k).map(|i| i.to_string()).collect(),
        }
    }

    /// Builds a matrix from row-major counts.
    pub fn from_counts(k: usize, counts: Vec<u64>) -> Result<Self> {
        if counts.len() != k * k {
            return Err(Error::InvalidArgument(format!(
                "confusion matrix of {k} classes needs {} counts, got {}",
                k * k,
                counts.len()
            )));
        }
        Ok(Self {
            counts,
            ..Self::new(k)
        })
    }

    pub fn with_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.k {
            return Err(Error::InvalidArgument(format!(
                "{} class names for {} classes",
                names.len(),
                self.k
            )));
        }
        self.class_names = names;
        Ok(self)
    }

    pub fn num_classes(&self) -> usize {
        self.k
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn get(&self, truth: usize, pred: usize) -> u64 {
        self.counts[truth * self.k + pred]
    }

    pub fn record(&mut self, truth: usize, pred: usize) -> Result<()> {
        for label in [truth, pred] {
            if label >= self.k {
                return Err(Error::LabelOutOfRange {
                    label,
                    num_classes: self.k,
                });
            }
        }
        self.counts[truth * self.k + pred] += 1;
        Ok(())
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.k).map(|i| self.get(i, i)).sum()
    }

    pub fn row_sum(&self, i: usize) -> u64 {
        (0..self.k).map(|j| self.get(i, j)).sum()
    }

    pub fn col_sum(&self, j: usize) -> u64 {
        (0..self.k).map(|i| self.get(i, j)).sum()
    }
}

pub fn confusion(true_labels: &[usize], predicted: &[usize], k: usize) -> Result<ConfusionMatrix> {
    if true_labels.len() != predicted.len() {
        return Err(Error::InvalidArgument(format!(
            "{} true labels but {} predictions",
            true_labels.len(),
            predicted.len()
        )));
    }
    let mut cm = ConfusionMatrix::new(k);
    for (&t, &p) in true_labels.iter().zip(predicted) {
        cm.record(t, p)?;
    }
    Ok(cm)
}

/// An unreduced ratio of counts. A zero denominator reads as 0.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Fraction {
    pub num: u64,
    pub den: u64,
}

impl Fraction {
    pub fn new(num: u64, den: u64) -> Self {
        Self { num, den }
    }

    pub fn is_defined(&self) -> bool {
        self.den != 0
    }

    pub fn value(&self) -> f64 {
        if self.den == 0 {
            0.0
        } else {
            self.num as f64 / self.den as f64
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClassMetrics {
    pub name: String,
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub support: u64,
    pub precision: Fraction,
    pub recall: Fraction,
    /// `2TP / (2TP + FP + FN)`, the harmonic mean of precision and recall.
    pub f1: Fraction,
    /// Set when the precision denominator is zero (class never predicted).
    pub precision_undefined: bool,
    /// Set when the recall denominator is zero (class absent).
    pub recall_undefined: bool,
    pub f1_undefined: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub dataset: String,
    pub model: String,
    pub per_class: Vec<ClassMetrics>,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub accuracy: Fraction,
    pub confusion: ConfusionMatrix,
}

impl EvalReport {
    pub fn named(mut self, dataset: impl Into<String>, model: impl Into<String>) -> Self {
        self.dataset = dataset.into();
        self.model = model.into();
        self
    }

    /// True when any per-class value hit a zero denominator.
    pub fn has_undefined(&self) -> bool {
        self.per_class
            .iter()
            .any(|c| c.precision_undefined || c.recall_undefined || c.f1_undefined)
    }
}

pub fn derive_metrics(cm: &ConfusionMatrix) -> EvalReport {
    let k = cm.num_classes();
    let per_class: Vec<ClassMetrics> = (0..k)
        .map(|c| {
            let tp = cm.get(c, c);
            let support = cm.row_sum(c);
            let predicted = cm.col_sum(c);
            let fp = predicted - tp;
            let fn_ = support - tp;
            let precision = Fraction::new(tp, predicted);
            let recall = Fraction::new(tp, support);
            let f1 = Fraction::new(2 * tp, 2 * tp + fp + fn_);
            ClassMetrics {
                name: cm.class_names()[c].clone(),
                tp,
                fp,
                fn_,
                support,
                precision,
                recall,
                f1,
                precision_undefined: !precision.is_defined(),
                recall_undefined: !recall.is_defined(),
                f1_undefined: !f1.is_defined(),
            }
        })
        .collect();
    let mean = |f: fn(&ClassMetrics) -> f64| {
        if k == 0 {
            0.0
        } else {
            per_class.iter().map(f).sum::<f64>() / k as f64
        }
    };
    EvalReport {
        dataset: String::new(),
        model: String::new(),
        macro_precision: mean(|c| c.precision.value()),
        macro_recall: mean(|c| c.recall.value()),
        macro_f1: mean(|c| c.f1.value()),
        accuracy: Fraction::new(cm.trace(), cm.total()),
        confusion: cm.clone(),
        per_class,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argmax_tie_breaks_low() {
        assert_eq!(argmax(&[0.2, 0.4, 0.4]), 1);
        assert_eq!(argmax(&[1.0]), 0);
        assert_eq!(argmax(&[3, 3, 3]), 0);
    }

    #[test]
    fn perfect_predictions_diagonal() {
        let labels = [0, 1, 2, 2, 1, 0, 0];
        let cm = confusion(&labels, &labels, 3).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    assert_eq!(cm.get(i, j), 0);
                }
            }
        }
        let r = derive_metrics(&cm);
        assert_eq!(r.accuracy.value(), 1.0);
        assert_eq!(
            (r.macro_precision, r.macro_recall, r.macro_f1),
            (1.0, 1.0, 1.0)
        );
    }

    #[test]
    fn two_class_hand_example() {
        let cm = ConfusionMatrix::from_counts(2, vec![5, 5, 0, 10]).unwrap();
        let r = derive_metrics(&cm);
        assert_eq!(r.per_class[0].precision, Fraction::new(5, 5));
        assert_eq!(r.per_class[1].precision, Fraction::new(10, 15));
        assert_eq!(r.per_class[0].recall, Fraction::new(5, 10));
        assert_eq!(r.per_class[1].recall, Fraction::new(10, 10));
        assert_eq!(r.accuracy, Fraction::new(15, 20));
    }

    #[test]
    fn zero_support_flagged() {
        let cm = ConfusionMatrix::from_counts(2, vec![4, 0, 0, 0]).unwrap();
        let r = derive_metrics(&cm);
        let c = &r.per_class[1];
        assert!(c.precision_undefined && c.recall_undefined && c.f1_undefined);
        assert_eq!(c.f1.value(), 0.0);
        assert_eq!(r.macro_f1, 0.5);
        assert!(r.has_undefined());
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(confusion(&[0, 3], &[0, 1], 3).is_err());
        assert!(confusion(&[0], &[0, 1], 3).is_err());
    }
}
