//! Evaluation reports: a text table for terminals and a JSON document for
//! tooling. Both parse back.

use std::fmt::Write as _;

use banknote_core::metrics::{derive_metrics, ConfusionMatrix, EvalReport};
use serde::{Deserialize, Serialize};

use crate::error::{AppError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Text,
    Json,
}

pub const COLUMNS: [&str; 6] = [
    "Dataset",
    "Model",
    "Precision",
    "Recall",
    "Test Accuracy",
    "F1",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassDoc {
    pub name: String,
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub support: u64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub precision_undefined: bool,
    pub recall_undefined: bool,
    pub f1_undefined: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportDoc {
    pub dataset: String,
    pub model: String,
    pub precision: f64,
    pub recall: f64,
    pub accuracy: f64,
    pub f1: f64,
    pub correct: u64,
    pub total: u64,
    pub per_class: Vec<ClassDoc>,
    pub class_names: Vec<String>,
    /// Rows are true classes, columns predicted classes.
    pub confusion: Vec<Vec<u64>>,
}

impl ReportDoc {
    pub fn from_report(r: &EvalReport) -> Self {
        let k = r.confusion.num_classes();
        Self {
            dataset: r.dataset.clone(),
            model: r.model.clone(),
            precision: r.macro_precision,
            recall: r.macro_recall,
            accuracy: r.accuracy.value(),
            f1: r.macro_f1,
            correct: r.accuracy.num,
            total: r.accuracy.den,
            per_class: r
                .per_class
                .iter()
                .map(|c| ClassDoc {
                    name: c.name.clone(),
                    tp: c.tp,
                    fp: c.fp,
                    fn_: c.fn_,
                    support: c.support,
                    precision: c.precision.value(),
                    recall: c.recall.value(),
                    f1: c.f1.value(),
                    precision_undefined: c.precision_undefined,
                    recall_undefined: c.recall_undefined,
                    f1_undefined: c.f1_undefined,
                })
                .collect(),
            class_names: r.confusion.class_names().to_vec(),
            confusion: (0..k)
                .map(|i| (0..k).map(|j| r.confusion.get(i, j)).collect())
                .collect(),
        }
    }

    /// Rebuilds the report from the confusion counts and checks that every
    /// stored field agrees with the recomputation.
    pub fn to_report(&self) -> Result<EvalReport> {
        let k = self.class_names.len();
        if self.confusion.len() != k || self.confusion.iter().any(|row| row.len() != k) {
            return Err(AppError::Report(format!("confusion matrix is not {k}×{k}")));
        }
        let cm = ConfusionMatrix::from_counts(k, self.confusion.concat())?
            .with_names(self.class_names.clone())?;
        let report = derive_metrics(&cm).named(self.dataset.clone(), self.model.clone());
        if ReportDoc::from_report(&report) != *self {
            return Err(AppError::Report(format!(
                "stored metrics for {}/{} disagree with the confusion matrix",
                self.dataset, self.model
            )));
        }
        Ok(report)
    }
}

fn two(v: f64) -> String {
    format!("{v:.2}")
}

fn table(rows: &[[String; 6]]) -> String {
    let mut widths: Vec<usize> = COLUMNS.iter().map(|c| c.len()).collect();
    for r in rows {
        for (w, cell) in widths.iter_mut().zip(r) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: &[String]| -> String {
        let body: Vec<String> = cells
            .iter()
            .zip(&widths)
            .map(|(c, &w)| format!("{c:<w$}"))
            .collect();
        format!("| {} |\n", body.join(" | "))
    };
    let header: Vec<String> = COLUMNS.iter().map(|c| c.to_string()).collect();
    let mut s = line(&header);
    let rule: Vec<String> = widths.iter().map(|&w| "-".repeat(w)).collect();
    s.push_str(&format!("|-{}-|\n", rule.join("-|-")));
    for r in rows {
        s.push_str(&line(r));
    }
    s
}

/// Summary rows: text is one table row per report at two decimals, JSON
/// is an array of [`ReportDoc`].
pub fn render_report(reports: &[EvalReport], format: ReportFormat) -> String {
    match format {
        ReportFormat::Text => {
            let rows: Vec<[String; 6]> = reports
                .iter()
                .map(|r| {
                    [
                        r.dataset.clone(),
                        r.model.clone(),
                        two(r.macro_precision),
                        two(r.macro_recall),
                        two(r.accuracy.value()),
                        two(r.macro_f1),
                    ]
                })
                .collect();
            table(&rows)
        }
        ReportFormat::Json => {
            let docs: Vec<ReportDoc> = reports.iter().map(ReportDoc::from_report).collect();
            let mut s = serde_json::to_string_pretty(&docs).expect("reports serialize");
            s.push('\n');
            s
        }
    }
}

/// Per-class breakdown and confusion matrix of one report. Values marked
/// `*` had a zero denominator and count as 0.
pub fn render_details(r: &EvalReport) -> String {
    let mut s = String::new();
    let name_w = r
        .per_class
        .iter()
        .map(|c| c.name.len())
        .max()
        .unwrap_or(0)
        .max(5);
    writeln!(s, "{:<name_w$}  precision  recall  f1     support", "class").unwrap();
    let cell = |v: f64, undefined: bool| format!("{:.2}{}", v, if undefined { "*" } else { " " });
    for c in &r.per_class {
        writeln!(
            s,
            "{:<name_w$}  {:<9}  {:<6}  {:<5}  {}",
            c.name,
            cell(c.precision.value(), c.precision_undefined),
            cell(c.recall.value(), c.recall_undefined),
            cell(c.f1.value(), c.f1_undefined),
            c.support
        )
        .unwrap();
    }
    if r.has_undefined() {
        s.push_str("* zero denominator, reported as 0\n");
    }
    writeln!(s, "accuracy {}/{}", r.accuracy.num, r.accuracy.den).unwrap();
    s.push_str("confusion (rows true, columns predicted)\n");
    let k = r.confusion.num_classes();
    for i in 0..k {
        let row: Vec<String> = (0..k).map(|j| r.confusion.get(i, j).to_string()).collect();
        writeln!(
            s,
            "{:<name_w$}  {}",
            r.confusion.class_names()[i],
            row.join(" ")
        )
        .unwrap();
    }
    s
}

/// Parses a JSON report document back into validated reports.
pub fn parse_json(text: &str) -> Result<Vec<EvalReport>> {
    let docs: Vec<ReportDoc> =
        serde_json::from_str(text).map_err(|e| AppError::Report(e.to_string()))?;
    docs.iter().map(ReportDoc::to_report).collect()
}

/// Parses the text table back into its cells, one array per row.
pub fn parse_text(text: &str) -> Result<Vec<[String; 6]>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let split = |l: &str| -> Result<[String; 6]> {
        let inner = l
            .trim()
            .strip_prefix('|')
            .and_then(|l| l.strip_suffix('|'))
            .ok_or_else(|| AppError::Report(format!("not a table row: {l:?}")))?;
        let cells: Vec<String> = inner.split('|').map(|c| c.trim().to_string()).collect();
        cells
            .try_into()
            .map_err(|_| AppError::Report(format!("expected 6 cells in {l:?}")))
    };
    match lines.next().map(split).transpose()? {
        Some(h) if h == COLUMNS.map(String::from) => {}
        _ => return Err(AppError::Report("missing table header".into())),
    }
    lines.next();
    lines.map(split).collect()
}
