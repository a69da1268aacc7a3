//! Confusion counts, precision/recall/F1/accuracy and report tables.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::datakit::LabelSpace;
use crate::error::{Error, Result};

/// One-vs-rest counts for a single class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub classes: Vec<String>,
    pub counts: Vec<ClassCounts>,
    pub total: usize,
    pub correct: usize,
}

pub fn confusion(truths: &[usize], preds: &[usize], space: &LabelSpace) -> Result<ConfusionCounts> {
    if truths.len() != preds.len() {
        return Err(Error::Input(format!(
            "{} truths but {} predictions",
            truths.len(),
            preds.len()
        )));
    }
    if truths.is_empty() {
        return Err(Error::Input("confusion of an empty sequence".into()));
    }
    let k = space.len();
    if let Some(bad) = truths.iter().chain(preds).find(|&&l| l >= k) {
        return Err(Error::Input(format!("label {bad} outside the {k}-class space")));
    }
    let mut counts = vec![ClassCounts::default(); k];
    for (&t, &p) in truths.iter().zip(preds) {
        if t == p {
            counts[t].tp += 1;
        } else {
            counts[p].fp += 1;
            counts[t].fn_ += 1;
        }
    }
    let total = truths.len();
    for c in &mut counts {
        c.tn = total - c.tp - c.fp - c.fn_;
    }
    Ok(ConfusionCounts {
        classes: space.names.clone(),
        correct: counts.iter().map(|c| c.tp).sum(),
        counts,
        total,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub classes: Vec<String>,
    pub per_class: Vec<ClassMetrics>,
    pub accuracy: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    /// Set when one class holds more than 80% of the samples, where accuracy says little.
    pub accuracy_uninformative: bool,
}

/// Share of the majority class above which accuracy is flagged.
pub const SKEW_THRESHOLD: f64 = 0.8;

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Zero denominators give 0; macro means include every class.
pub fn compute_metrics(counts: &ConfusionCounts) -> MetricsReport {
    let per_class: Vec<ClassMetrics> = counts
        .counts
        .iter()
        .map(|c| {
            let precision = ratio(c.tp, c.tp + c.fp);
            let recall = ratio(c.tp, c.tp + c.fn_);
            let f1 = if precision + recall == 0.0 {
                0.0
            } else {
                2.0 * precision * recall / (precision + recall)
            };
            ClassMetrics {
                precision,
                recall,
                f1,
                support: c.tp + c.fn_,
            }
        })
        .collect();
    let k = per_class.len().max(1) as f64;
    let mean = |f: fn(&ClassMetrics) -> f64| per_class.iter().map(f).sum::<f64>() / k;
    let majority = per_class.iter().map(|c| c.support).max().unwrap_or(0);
    MetricsReport {
        classes: counts.classes.clone(),
        accuracy: ratio(counts.correct, counts.total),
        macro_precision: mean(|c| c.precision),
        macro_recall: mean(|c| c.recall),
        macro_f1: mean(|c| c.f1),
        accuracy_uninformative: ratio(majority, counts.total) > SKEW_THRESHOLD,
        per_class,
    }
}

/// `confusion` followed by `compute_metrics`.
pub fn evaluate_labels(truths: &[usize], preds: &[usize], space: &LabelSpace) -> Result<MetricsReport> {
    Ok(compute_metrics(&confusion(truths, preds, space)?))
}

/// One row of a results table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub model: String,
    pub input_modes: String,
    pub fusion: String,
    pub report: MetricsReport,
}

const HEADER: [&str; 7] = ["Model", "Input modes", "Fusion type", "P", "R", "F", "A"];

fn cells(row: &ReportRow) -> [String; 7] {
    let r = &row.report;
    let acc = if r.accuracy_uninformative {
        format!("{:.4}*", r.accuracy)
    } else {
        format!("{:.4}", r.accuracy)
    };
    [
        row.model.clone(),
        row.input_modes.clone(),
        row.fusion.clone(),
        format!("{:.4}", r.macro_precision),
        format!("{:.4}", r.macro_recall),
        format!("{:.4}", r.macro_f1),
        acc,
    ]
}

/// Aligned plain-text table. Accuracy on skewed data is starred.
pub fn render_table(rows: &[ReportRow]) -> String {
    let body: Vec<[String; 7]> = rows.iter().map(cells).collect();
    let mut widths: Vec<usize> = HEADER.iter().map(|h| h.len()).collect();
    for r in &body {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.chars().count());
        }
    }
    let line = |cols: &[String]| {
        cols.iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect::<Vec<_>>()
            .join(" | ")
            .trim_end()
            .to_string()
    };
    let mut out = String::new();
    let head: Vec<String> = HEADER.iter().map(|s| s.to_string()).collect();
    writeln!(out, "{}", line(&head)).unwrap();
    writeln!(out, "{}", widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().join("-|-")).unwrap();
    for r in &body {
        writeln!(out, "{}", line(r)).unwrap();
    }
    if rows.iter().any(|r| r.report.accuracy_uninformative) {
        out.push_str("* accuracy on a skewed label distribution\n");
    }
    out
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Same table as CSV with full-precision numbers.
pub fn render_csv(rows: &[ReportRow]) -> String {
    let mut out = String::from("model,input_modes,fusion,precision,recall,f1,accuracy,accuracy_uninformative\n");
    for row in rows {
        let r = &row.report;
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            csv_field(&row.model),
            csv_field(&row.input_modes),
            csv_field(&row.fusion),
            r.macro_precision,
            r.macro_recall,
            r.macro_f1,
            r.accuracy,
            r.accuracy_uninformative
        )
        .unwrap();
    }
    out
}

/// Per-class breakdown as plain text.
pub fn render_per_class(report: &MetricsReport) -> String {
    let mut out = String::from("class | P | R | F | support\n");
    for (name, c) in report.classes.iter().zip(&report.per_class) {
        writeln!(out, "{name} | {:.4} | {:.4} | {:.4} | {}", c.precision, c.recall, c.f1, c.support).unwrap();
    }
    out
}
