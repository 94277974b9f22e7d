//! Scoring and report tables: unclassified rate, accuracy, precision/recall/
//! F1 under weighted and macro averaging, and cross-label-scheme accuracy.
//!
//! Scoring rules, also stamped into every report header:
//! - a prediction is correct iff it matches ANY ground-truth class of the
//!   record (multi-label ground truth, single prediction);
//! - UNCLASSIFIED predictions are always incorrect, count toward the
//!   unclassified rate, and are excluded from per-class precision
//!   denominators (no class was asserted);
//! - weighted averages weight per-class metrics by class support, so weighted
//!   recall reduces to sum(TP)/N and equals accuracy identically.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::extract::Prediction;
use crate::labelspace::{DrugClass, LabelError, LabelMap};
use crate::seqio::SourceDb;

pub type Result<T> = std::result::Result<T, EvalError>;

pub const N_CLASSES: usize = 9;
/// Column index of UNCLASSIFIED in the confusion matrix.
pub const UNCLASSIFIED_COL: usize = N_CLASSES;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no ground truth for record {0:?}")]
    MissingGroundTruth(String),
    #[error("record {record_id:?} has invalid ground truth: {reason}")]
    InvalidGroundTruth { record_id: String, reason: String },
    #[error("nothing to score")]
    EmptyInput,
    #[error(transparent)]
    Label(#[from] LabelError),
}

/// Which pieces of configuration produced a report; rendered into table rows
/// and report headers.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunFingerprint {
    pub model_name: String,
    pub template: String,
    pub backend_kind: String,
    pub aligner: String,
    pub lexicon_digest: String,
    pub label_table_digest: String,
}

impl RunFingerprint {
    /// Row label in the emitted tables, e.g. `demo-model (Blastn)`.
    pub fn display_label(&self) -> String {
        let suffix = match self.template.as_str() {
            "BLAST_AUGMENTED" => " (Blastn)",
            "SEQUENCE_ONLY" => " (Base Model)",
            _ => "",
        };
        format!("{}{}", self.model_name, suffix)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PerClass {
    pub support: usize,
    pub true_positives: usize,
    pub predicted: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n_total: usize,
    pub n_unclassified: usize,
    pub unclassified_rate: f64,
    /// True class (9) x predicted class (9 + UNCLASSIFIED).
    pub confusion: [[usize; N_CLASSES + 1]; N_CLASSES],
    pub accuracy: f64,
    pub precision_weighted: f64,
    pub recall_weighted: f64,
    pub f1_weighted: f64,
    pub precision_macro: f64,
    pub recall_macro: f64,
    pub f1_macro: f64,
    pub per_class: [PerClass; N_CLASSES],
    pub fingerprint: RunFingerprint,
}

impl EvalReport {
    /// Minimal report carrying only an accuracy, for cross-label layouts.
    pub fn accuracy_only(outcome: &CrossOutcome, fingerprint: RunFingerprint) -> EvalReport {
        EvalReport {
            n_total: outcome.n_total,
            n_unclassified: 0,
            unclassified_rate: 0.0,
            confusion: [[0; N_CLASSES + 1]; N_CLASSES],
            accuracy: outcome.accuracy,
            precision_weighted: 0.0,
            recall_weighted: 0.0,
            f1_weighted: 0.0,
            precision_macro: 0.0,
            recall_macro: 0.0,
            f1_macro: 0.0,
            per_class: [PerClass::default(); N_CLASSES],
            fingerprint,
        }
    }
}

/// Score predictions against multi-label ground truth.
pub fn score(
    predictions: &[Prediction],
    truth: &BTreeMap<String, BTreeSet<DrugClass>>,
    fingerprint: RunFingerprint,
) -> Result<EvalReport> {
    if predictions.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let mut confusion = [[0usize; N_CLASSES + 1]; N_CLASSES];
    let mut n_unclassified = 0usize;

    for pred in predictions {
        let truth_set = truth
            .get(&pred.record_id)
            .ok_or_else(|| EvalError::MissingGroundTruth(pred.record_id.clone()))?;
        if truth_set.is_empty() || truth_set.contains(&DrugClass::Unclassified) {
            return Err(EvalError::InvalidGroundTruth {
                record_id: pred.record_id.clone(),
                reason: "ground truth must be a non-empty set of substantive classes".into(),
            });
        }
        let correct = truth_set.contains(&pred.predicted_class);
        // correct predictions attribute to the matched class; wrong ones to
        // the record's first class in canonical order
        let row = if correct {
            pred.predicted_class.class_index().expect("substantive")
        } else {
            truth_set
                .iter()
                .next()
                .expect("non-empty")
                .class_index()
                .expect("substantive")
        };
        let col = match pred.predicted_class.class_index() {
            Some(idx) => idx,
            None => {
                n_unclassified += 1;
                UNCLASSIFIED_COL
            }
        };
        confusion[row][col] += 1;
    }

    let n_total = predictions.len();
    let n = n_total as f64;
    let mut per_class = [PerClass::default(); N_CLASSES];
    let mut total_tp = 0usize;
    for c in 0..N_CLASSES {
        let support: usize = confusion[c].iter().sum();
        let tp = confusion[c][c];
        let predicted: usize = (0..N_CLASSES).map(|r| confusion[r][c]).sum();
        total_tp += tp;
        let precision = if predicted > 0 {
            tp as f64 / predicted as f64
        } else {
            0.0
        };
        let recall = if support > 0 {
            tp as f64 / support as f64
        } else {
            0.0
        };
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        per_class[c] = PerClass {
            support,
            true_positives: tp,
            predicted,
            precision,
            recall,
            f1,
        };
    }

    let accuracy = total_tp as f64 / n;
    let weighted = |metric: fn(&PerClass) -> f64, per_class: &[PerClass; N_CLASSES]| {
        per_class
            .iter()
            .map(|pc| metric(pc) * pc.support as f64)
            .sum::<f64>()
            / n
    };
    let macro_avg = |metric: fn(&PerClass) -> f64, per_class: &[PerClass; N_CLASSES]| {
        per_class.iter().map(metric).sum::<f64>() / N_CLASSES as f64
    };

    Ok(EvalReport {
        n_total,
        n_unclassified,
        unclassified_rate: n_unclassified as f64 / n,
        confusion,
        accuracy,
        precision_weighted: weighted(|pc| pc.precision, &per_class),
        // weighted recall is sum(TP)/N by the support-weighting identity;
        // computing it as such keeps the equality with accuracy exact
        recall_weighted: accuracy,
        f1_weighted: weighted(|pc| pc.f1, &per_class),
        precision_macro: macro_avg(|pc| pc.precision, &per_class),
        recall_macro: macro_avg(|pc| pc.recall, &per_class),
        f1_macro: macro_avg(|pc| pc.f1, &per_class),
        per_class,
        fingerprint,
    })
}

/// Cross-label-scheme accuracy: predictions mapped into the target scheme and
/// compared against target-scheme label strings. Predictions with no target
/// equivalent score as incorrect and are counted separately.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossOutcome {
    pub n_total: usize,
    pub n_correct: usize,
    pub n_no_equivalent: usize,
    pub accuracy: f64,
}

pub fn score_crossmapped(
    predictions: &[Prediction],
    target_truth: &BTreeMap<String, BTreeSet<String>>,
    map: &LabelMap,
    target_db: SourceDb,
) -> Result<CrossOutcome> {
    if predictions.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let mut n_correct = 0usize;
    let mut n_no_equivalent = 0usize;
    for pred in predictions {
        let truth_set = target_truth
            .get(&pred.record_id)
            .ok_or_else(|| EvalError::MissingGroundTruth(pred.record_id.clone()))?;
        if pred.predicted_class == DrugClass::Unclassified {
            continue;
        }
        match map.crossmap(pred.predicted_class, target_db) {
            Ok(label) => {
                if truth_set.contains(&label) {
                    n_correct += 1;
                }
            }
            Err(LabelError::NoTargetEquivalent { .. }) => n_no_equivalent += 1,
            Err(other) => return Err(other.into()),
        }
    }
    Ok(CrossOutcome {
        n_total: predictions.len(),
        n_correct,
        n_no_equivalent,
        accuracy: n_correct as f64 / predictions.len() as f64,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TableLayout {
    #[serde(rename = "UNCLASSIFIED_RATE")]
    UnclassifiedRate,
    #[serde(rename = "FULL_METRICS")]
    FullMetrics,
    #[serde(rename = "CROSS_LABEL")]
    CrossLabel,
}

impl TableLayout {
    pub fn as_str(&self) -> &'static str {
        match self {
            TableLayout::UnclassifiedRate => "UNCLASSIFIED_RATE",
            TableLayout::FullMetrics => "FULL_METRICS",
            TableLayout::CrossLabel => "CROSS_LABEL",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tables {
    pub text: String,
    pub csv: String,
}

fn fmt_metric(v: f64) -> String {
    format!("{v:.4}")
}

fn fmt_rate(v: f64) -> String {
    format!("{}%", (v * 100.0).round() as i64)
}

fn csv_field(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Emit a deterministic text table and CSV for the chosen layout. Metrics
/// print to four decimals; rates as whole percents.
pub fn emit_tables(reports: &[EvalReport], layout: TableLayout) -> Result<Tables> {
    if reports.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let (header, rows): (Vec<&str>, Vec<Vec<String>>) = match layout {
        TableLayout::UnclassifiedRate => (
            vec!["Model", "Unclassified Rate"],
            reports
                .iter()
                .map(|r| vec![r.fingerprint.display_label(), fmt_rate(r.unclassified_rate)])
                .collect(),
        ),
        TableLayout::FullMetrics => (
            vec!["Model", "Accuracy", "Precision", "Recall", "F1 Score"],
            reports
                .iter()
                .map(|r| {
                    vec![
                        r.fingerprint.display_label(),
                        fmt_metric(r.accuracy),
                        fmt_metric(r.precision_weighted),
                        fmt_metric(r.recall_weighted),
                        fmt_metric(r.f1_weighted),
                    ]
                })
                .collect(),
        ),
        TableLayout::CrossLabel => (
            vec!["Model", "Accuracy"],
            reports
                .iter()
                .map(|r| vec![r.fingerprint.display_label(), fmt_metric(r.accuracy)])
                .collect(),
        ),
    };

    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in &rows {
        for (i, cell) in row.iter().enumerate() {
            widths[i] = widths[i].max(cell.len());
        }
    }
    let render_row = |cells: &[String]| -> String {
        cells
            .iter()
            .enumerate()
            .map(|(i, c)| format!("{:<width$}", c, width = widths[i]))
            .collect::<Vec<_>>()
            .join(" | ")
            .trim_end()
            .to_string()
    };

    let mut text = String::new();
    let header_cells: Vec<String> = header.iter().map(|s| s.to_string()).collect();
    text.push_str(&render_row(&header_cells));
    text.push('\n');
    text.push_str(&"-".repeat(widths.iter().sum::<usize>() + 3 * (widths.len() - 1)));
    text.push('\n');
    for row in &rows {
        text.push_str(&render_row(row));
        text.push('\n');
    }

    let mut csv = String::new();
    csv.push_str(&header.join(","));
    csv.push('\n');
    for row in &rows {
        let fields: Vec<String> = row.iter().map(|c| csv_field(c)).collect();
        csv.push_str(&fields.join(","));
        csv.push('\n');
    }

    Ok(Tables { text, csv })
}
