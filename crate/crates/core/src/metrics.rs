//! Classification-report arithmetic and token-level NER scoring.
//!
//! NER scores are micro-averaged over non-O positions only; accuracy is
//! computed over all tokens. Zero-denominator metrics report 0 together
//! with a degenerate flag rather than NaN.

use std::collections::HashMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::ner::Tag;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("length mismatch: {0} true vs {1} predicted")]
    LengthMismatch(usize, usize),
    #[error("unknown label {0}")]
    UnknownLabel(String),
    #[error("empty confusion matrix")]
    EmptyMatrix,
    #[error("shape mismatch at sentence {0}")]
    ShapeMismatch(usize),
}

/// Rows are true labels, columns are predicted labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    pub labels: Vec<String>,
    pub counts: Vec<Vec<usize>>,
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> usize {
        (0..self.labels.len()).map(|i| self.counts[i][i]).sum()
    }
}

/// Count (true, predicted) pairs over a declared label set.
pub fn confusion(
    y_true: &[String],
    y_pred: &[String],
    labels: &[String],
) -> Result<ConfusionMatrix, MetricsError> {
    if y_true.len() != y_pred.len() {
        return Err(MetricsError::LengthMismatch(y_true.len(), y_pred.len()));
    }
    let index: HashMap<&str, usize> = labels
        .iter()
        .enumerate()
        .map(|(i, l)| (l.as_str(), i))
        .collect();
    let mut counts = vec![vec![0usize; labels.len()]; labels.len()];
    for (t, p) in y_true.iter().zip(y_pred) {
        let ti = *index
            .get(t.as_str())
            .ok_or_else(|| MetricsError::UnknownLabel(t.clone()))?;
        let pi = *index
            .get(p.as_str())
            .ok_or_else(|| MetricsError::UnknownLabel(p.clone()))?;
        counts[ti][pi] += 1;
    }
    Ok(ConfusionMatrix {
        labels: labels.to_vec(),
        counts,
    })
}

/// Precision/recall/F1/support for one label.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelMetrics {
    pub label: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
    /// Set when a zero denominator forced a metric to 0.
    pub degenerate: bool,
}

/// Full classification report: per-label rows plus accuracy and the macro
/// and weighted averages.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassificationReport {
    pub per_label: Vec<LabelMetrics>,
    pub accuracy: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub weighted_precision: f64,
    pub weighted_recall: f64,
    pub weighted_f1: f64,
    pub total_support: usize,
}

fn safe_div(num: f64, den: f64) -> (f64, bool) {
    if den == 0.0 {
        (0.0, true)
    } else {
        (num / den, false)
    }
}

fn f1_of(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

fn aggregate(rows: &[LabelMetrics], accuracy: f64) -> ClassificationReport {
    let n = rows.len() as f64;
    let total_support: usize = rows.iter().map(|r| r.support).sum();
    let ts = total_support as f64;
    let weighted = |f: fn(&LabelMetrics) -> f64| {
        if total_support == 0 {
            0.0
        } else {
            rows.iter().map(|r| f(r) * r.support as f64).sum::<f64>() / ts
        }
    };
    ClassificationReport {
        accuracy,
        macro_precision: rows.iter().map(|r| r.precision).sum::<f64>() / n,
        macro_recall: rows.iter().map(|r| r.recall).sum::<f64>() / n,
        macro_f1: rows.iter().map(|r| r.f1).sum::<f64>() / n,
        weighted_precision: weighted(|r| r.precision),
        weighted_recall: weighted(|r| r.recall),
        weighted_f1: weighted(|r| r.f1),
        total_support,
        per_label: rows.to_vec(),
    }
}

/// Derive the full report from a confusion matrix.
pub fn classification_report(m: &ConfusionMatrix) -> Result<ClassificationReport, MetricsError> {
    let total = m.total();
    if total == 0 || m.labels.is_empty() {
        return Err(MetricsError::EmptyMatrix);
    }
    let n = m.labels.len();
    let mut rows = Vec::with_capacity(n);
    for i in 0..n {
        let tp = m.counts[i][i] as f64;
        let pred_total: f64 = (0..n).map(|j| m.counts[j][i] as f64).sum();
        let true_total: f64 = (0..n).map(|j| m.counts[i][j] as f64).sum();
        let (precision, d1) = safe_div(tp, pred_total);
        let (recall, d2) = safe_div(tp, true_total);
        rows.push(LabelMetrics {
            label: m.labels[i].clone(),
            precision,
            recall,
            f1: f1_of(precision, recall),
            support: true_total as usize,
            degenerate: d1 || d2,
        });
    }
    let accuracy = m.trace() as f64 / total as f64;
    Ok(aggregate(&rows, accuracy))
}

/// Build a report from externally given per-label precision/recall/support
/// rows. Accuracy equals the support-weighted recall (micro accuracy for
/// single-label classification).
pub fn report_from_rows(rows: &[(String, f64, f64, usize)]) -> ClassificationReport {
    let per_label: Vec<LabelMetrics> = rows
        .iter()
        .map(|(label, p, r, s)| LabelMetrics {
            label: label.clone(),
            precision: *p,
            recall: *r,
            f1: f1_of(*p, *r),
            support: *s,
            degenerate: false,
        })
        .collect();
    let total: usize = per_label.iter().map(|r| r.support).sum();
    let accuracy = if total == 0 {
        0.0
    } else {
        per_label
            .iter()
            .map(|r| r.recall * r.support as f64)
            .sum::<f64>()
            / total as f64
    };
    aggregate(&per_label, accuracy)
}

/// Round half-up at 4 decimals, the display convention of the report
/// tables.
pub fn round4(x: f64) -> f64 {
    (x * 10_000.0 + 0.5).floor() / 10_000.0
}

fn fmt4(x: f64) -> String {
    format!("{:.4}", round4(x))
}

/// Tab-separated report table: per-label rows, then accuracy, macro and
/// weighted rows, all at 4-decimal display.
pub fn format_report(report: &ClassificationReport) -> String {
    let mut out = String::new();
    writeln!(out, "label\tprecision\trecall\tf1-score\tsupport").unwrap();
    for row in &report.per_label {
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}",
            row.label,
            fmt4(row.precision),
            fmt4(row.recall),
            fmt4(row.f1),
            row.support
        )
        .unwrap();
    }
    writeln!(
        out,
        "accuracy\t\t\t{}\t{}",
        fmt4(report.accuracy),
        report.total_support
    )
    .unwrap();
    writeln!(
        out,
        "macro avg\t{}\t{}\t{}\t{}",
        fmt4(report.macro_precision),
        fmt4(report.macro_recall),
        fmt4(report.macro_f1),
        report.total_support
    )
    .unwrap();
    writeln!(
        out,
        "weighted avg\t{}\t{}\t{}\t{}",
        fmt4(report.weighted_precision),
        fmt4(report.weighted_recall),
        fmt4(report.weighted_f1),
        report.total_support
    )
    .unwrap();
    out
}

/// Micro scores over entity positions, with accuracy over all tokens.
#[derive(Debug, Clone, PartialEq)]
pub struct NerScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
    /// True when neither truth nor prediction contains any entity tag.
    pub all_o: bool,
}

fn check_shapes(truth: &[Vec<Tag>], pred: &[Vec<Tag>]) -> Result<(), MetricsError> {
    if truth.len() != pred.len() {
        return Err(MetricsError::ShapeMismatch(truth.len().min(pred.len())));
    }
    for (i, (t, p)) in truth.iter().zip(pred).enumerate() {
        if t.len() != p.len() {
            return Err(MetricsError::ShapeMismatch(i));
        }
    }
    Ok(())
}

/// Token-level NER scores excluding non-entity positions from P/R/F1.
pub fn ner_scores(truth: &[Vec<Tag>], pred: &[Vec<Tag>]) -> Result<NerScores, MetricsError> {
    check_shapes(truth, pred)?;
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut fne = 0usize;
    let mut correct = 0usize;
    let mut total = 0usize;
    for (ts, ps) in truth.iter().zip(pred) {
        for (t, p) in ts.iter().zip(ps) {
            total += 1;
            if t == p {
                correct += 1;
            }
            if p.is_entity() && t == p {
                tp += 1;
            }
            if p.is_entity() && t != p {
                fp += 1;
            }
            if t.is_entity() && t != p {
                fne += 1;
            }
        }
    }
    let all_o = tp + fp + fne == 0;
    let (precision, _) = safe_div(tp as f64, (tp + fp) as f64);
    let (recall, _) = safe_div(tp as f64, (tp + fne) as f64);
    let (accuracy, _) = safe_div(correct as f64, total as f64);
    Ok(NerScores {
        precision,
        recall,
        f1: f1_of(precision, recall),
        accuracy,
        all_o,
    })
}

/// Per-tag token-level rows over the five canonical entity tags plus any
/// extension tags present in the data.
pub fn per_entity_report(
    truth: &[Vec<Tag>],
    pred: &[Vec<Tag>],
) -> Result<Vec<LabelMetrics>, MetricsError> {
    check_shapes(truth, pred)?;
    let mut tags: Vec<Tag> = Tag::canonical_entities().to_vec();
    for seq in truth.iter().chain(pred) {
        for t in seq {
            if t.is_entity() && !tags.contains(t) {
                tags.push(t.clone());
            }
        }
    }
    let mut rows = Vec::with_capacity(tags.len());
    for tag in &tags {
        let mut tp = 0usize;
        let mut fp = 0usize;
        let mut fne = 0usize;
        for (ts, ps) in truth.iter().zip(pred) {
            for (t, p) in ts.iter().zip(ps) {
                if p == tag && t == p {
                    tp += 1;
                } else if p == tag {
                    fp += 1;
                } else if t == tag {
                    fne += 1;
                }
            }
        }
        let (precision, d1) = safe_div(tp as f64, (tp + fp) as f64);
        let (recall, d2) = safe_div(tp as f64, (tp + fne) as f64);
        rows.push(LabelMetrics {
            label: tag.as_str().to_string(),
            precision,
            recall,
            f1: f1_of(precision, recall),
            support: tp + fne,
            degenerate: d1 || d2,
        });
    }
    Ok(rows)
}
