//! Tab-separated per-epoch training history.

use std::fmt::Write as _;

use banknote_core::train::EpochRecord;

use crate::error::{AppError, Result};

pub const HEADER: &str = "epoch\tlr\ttrain_loss\ttrain_acc\tval_loss\tval_acc";

/// One row per epoch; floats use the shortest exact decimal form, so the
/// file parses back to identical values.
pub fn render_history(records: &[EpochRecord]) -> String {
    let mut s = format!("{HEADER}\n");
    for r in records {
        writeln!(
            s,
            "{}\t{}\t{}\t{}\t{}\t{}",
            r.epoch, r.lr, r.train_loss, r.train_acc, r.val_loss, r.val_acc
        )
        .unwrap();
    }
    s
}

pub fn parse_history(text: &str) -> Result<Vec<EpochRecord>> {
    let mut lines = text.lines();
    if lines.next() != Some(HEADER) {
        return Err(AppError::Report("history header missing".into()));
    }
    lines
        .filter(|l| !l.is_empty())
        .map(|line| {
            let bad = || AppError::Report(format!("bad history row {line:?}"));
            let cells: Vec<&str> = line.split('\t').collect();
            if cells.len() != 6 {
                return Err(bad());
            }
            let f = |i: usize| cells[i].parse::<f64>().map_err(|_| bad());
            Ok(EpochRecord {
                epoch: cells[0].parse().map_err(|_| bad())?,
                lr: f(1)?,
                train_loss: f(2)?,
                train_acc: f(3)?,
                val_loss: f(4)?,
                val_acc: f(5)?,
            })
        })
        .collect()
}
