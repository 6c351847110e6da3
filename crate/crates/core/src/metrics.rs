//! Confusion-matrix accumulation and per-class / macro-averaged IoU,
//! precision, recall and F-score.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::datasets::ClassMap;
use crate::SegMask;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("mask sizes differ: truth {0:?}, prediction {1:?}")]
    DimensionMismatch((usize, usize), (usize, usize)),
    #[error("{which} id {id} at pixel {index} is outside 0..{num_classes}")]
    IdOutOfRange { which: &'static str, id: u8, index: usize, num_classes: usize },
    #[error("cannot merge matrices of {0} and {1} classes")]
    ClassCountMismatch(usize, usize),
}

/// Rows are ground truth, columns are predictions.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    num_classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(num_classes: usize) -> Self {
        ConfusionMatrix { num_classes, counts: vec![0; num_classes * num_classes] }
    }

    pub fn from_counts(num_classes: usize, counts: Vec<u64>) -> Self {
        assert_eq!(counts.len(), num_classes * num_classes);
        ConfusionMatrix { num_classes, counts }
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn get(&self, truth: usize, pred: usize) -> u64 {
        self.counts[truth * self.num_classes + pred]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Adds one count per non-ignored pixel. The matrix is left untouched
    /// when any id is out of range.
    pub fn accumulate(&mut self, truth: &SegMask, pred: &SegMask, ignore_id: Option<u8>) -> Result<(), MetricsError> {
        let (td, pd) = ((truth.width(), truth.height()), (pred.width(), pred.height()));
        if td != pd {
            return Err(MetricsError::DimensionMismatch(td, pd));
        }
        let n = self.num_classes;
        for (index, (&t, &p)) in truth.ids().iter().zip(pred.ids()).enumerate() {
            if Some(t) == ignore_id {
                continue;
            }
            if t as usize >= n {
                return Err(MetricsError::IdOutOfRange { which: "truth", id: t, index, num_classes: n });
            }
            if p as usize >= n {
                return Err(MetricsError::IdOutOfRange { which: "prediction", id: p, index, num_classes: n });
            }
        }
        for (&t, &p) in truth.ids().iter().zip(pred.ids()) {
            if Some(t) != ignore_id {
                self.counts[t as usize * n + p as usize] += 1;
            }
        }
        Ok(())
    }

    /// Elementwise sum; partial matrices from parallel workers merge here.
    pub fn merge(&mut self, other: &ConfusionMatrix) -> Result<(), MetricsError> {
        if other.num_classes != self.num_classes {
            return Err(MetricsError::ClassCountMismatch(self.num_classes, other.num_classes));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        Ok(())
    }

    pub fn report(&self) -> EvalReport {
        compute_report(self)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub iou: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f_score: Option<f64>,
}

impl ClassMetrics {
    pub fn values(&self) -> [Option<f64>; 4] {
        [self.iou, self.precision, self.recall, self.f_score]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub per_class: Vec<ClassMetrics>,
    /// Macro averages over classes where the metric is defined.
    pub mean: ClassMetrics,
    /// How many classes were left out of each mean (iou, precision, recall, f).
    pub excluded: [usize; 4],
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

/// Per-class IoU = TP/(TP+FP+FN), precision = TP/(TP+FP), recall =
/// TP/(TP+FN), F = 2TP/(2TP+FP+FN) (equal to 2PR/(P+R) where both exist).
/// A metric with a zero denominator is undefined and excluded from the mean.
pub fn compute_report(cm: &ConfusionMatrix) -> EvalReport {
    let n = cm.num_classes;
    let per_class: Vec<ClassMetrics> = (0..n)
        .map(|c| {
            let tp = cm.get(c, c);
            let row: u64 = (0..n).map(|p| cm.get(c, p)).sum();
            let col: u64 = (0..n).map(|t| cm.get(t, c)).sum();
            let (fn_, fp) = (row - tp, col - tp);
            ClassMetrics {
                iou: ratio(tp, tp + fp + fn_),
                precision: ratio(tp, tp + fp),
                recall: ratio(tp, tp + fn_),
                f_score: ratio(2 * tp, 2 * tp + fp + fn_),
            }
        })
        .collect();
    let mut mean = [None; 4];
    let mut excluded = [0; 4];
    for k in 0..4 {
        let defined: Vec<f64> = per_class.iter().filter_map(|m| m.values()[k]).collect();
        excluded[k] = n - defined.len();
        if !defined.is_empty() {
            mean[k] = Some(defined.iter().sum::<f64>() / defined.len() as f64);
        }
    }
    EvalReport {
        per_class,
        mean: ClassMetrics { iou: mean[0], precision: mean[1], recall: mean[2], f_score: mean[3] },
        excluded,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TableFormat {
    Csv,
    Markdown,
}

pub const UNDEFINED_CELL: &str = "—";
pub const MEAN_LABEL: &str = "__mean__";

fn cell(x: Option<f64>) -> String {
    match x {
        Some(v) => format!("{:.2}", 100.0 * v),
        None => UNDEFINED_CELL.to_string(),
    }
}

fn class_label(class_map: &ClassMap, c: usize) -> String {
    class_map.name(c as u8).map(str::to_string).unwrap_or_else(|| format!("class{c}"))
}

/// One row per class with the mean row first; values are percentages with
/// two decimals and undefined cells render as `—`.
pub fn render_table(report: &EvalReport, class_map: &ClassMap, format: TableFormat) -> String {
    let mut rows: Vec<(String, ClassMetrics)> = vec![(MEAN_LABEL.to_string(), report.mean)];
    rows.extend(report.per_class.iter().enumerate().map(|(c, m)| (class_label(class_map, c), *m)));
    let mut out = String::new();
    match format {
        TableFormat::Csv => {
            out.push_str("class,iou,precision,recall,fscore\n");
            for (name, m) in rows {
                let cells: Vec<String> = m.values().into_iter().map(cell).collect();
                writeln!(out, "{},{}", name, cells.join(",")).unwrap();
            }
        }
        TableFormat::Markdown => {
            out.push_str("| Class | IoU | Precision | Recall | F-Score |\n|---|---|---|---|---|\n");
            for (name, m) in rows {
                let name = if name == MEAN_LABEL { "Mean".to_string() } else { name };
                let cells: Vec<String> = m.values().into_iter().map(cell).collect();
                writeln!(out, "| {} | {} |", name, cells.join(" | ")).unwrap();
            }
            if report.excluded.iter().any(|&e| e > 0) {
                let [i, p, r, f] = report.excluded;
                writeln!(
                    out,
                    "\nUndefined classes excluded from means: IoU {i}, precision {p}, recall {r}, F-score {f}"
                )
                .unwrap();
            }
        }
    }
    out
}

/// Per-class IoU laid out as columns (`Type | Mean | class...`), one row per
/// labelled report.
pub fn render_iou_by_class(rows: &[(String, EvalReport)], class_map: &ClassMap) -> String {
    let mut out = String::from("| Type | Mean |");
    for e in class_map.entries() {
        write!(out, " {} |", e.name).unwrap();
    }
    out.push_str("\n|---|---|");
    out.push_str(&"---|".repeat(class_map.len()));
    out.push('\n');
    for (label, report) in rows {
        write!(out, "| {} | {} |", label, cell(report.mean.iou)).unwrap();
        for c in 0..class_map.len() {
            write!(out, " {} |", cell(report.per_class.get(c).and_then(|m| m.iou))).unwrap();
        }
        out.push('\n');
    }
    out
}

/// Mean IoU / precision / recall / F-score per labelled report, one row each.
pub fn render_summary(rows: &[(String, EvalReport)], format: TableFormat) -> String {
    let mut out = String::new();
    match format {
        TableFormat::Csv => out.push_str("network,iou,precision,recall,fscore\n"),
        TableFormat::Markdown => {
            out.push_str("| Network Type | IoU | Precision | Recall | F-Score |\n|---|---|---|---|---|\n")
        }
    }
    for (label, report) in rows {
        let cells: Vec<String> = report.mean.values().into_iter().map(cell).collect();
        match format {
            TableFormat::Csv => writeln!(out, "{},{}", label, cells.join(",")).unwrap(),
            TableFormat::Markdown => writeln!(out, "| {} | {} |", label, cells.join(" | ")).unwrap(),
        }
    }
    out
}

pub type CsvRow = (String, [Option<f64>; 4]);

/// Parses [`render_table`] CSV output back into fractions in `[0, 1]`.
pub fn parse_csv_table(text: &str) -> Result<Vec<CsvRow>, String> {
    let mut lines = text.lines();
    if lines.next() != Some("class,iou,precision,recall,fscore") {
        return Err("missing header".into());
    }
    lines
        .filter(|l| !l.is_empty())
        .map(|line| {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 5 {
                return Err(format!("bad row `{line}`"));
            }
            let mut values = [None; 4];
            for (k, f) in fields[1..].iter().enumerate() {
                values[k] = match *f {
                    UNDEFINED_CELL => None,
                    v => Some(v.parse::<f64>().map_err(|e| format!("`{v}`: {e}"))? / 100.0),
                };
            }
            Ok((fields[0].to_string(), values))
        })
        .collect()
}
