//! Confusion matrices, accuracy/precision/recall/F1, and the comparison
//! report against published baseline results.

mod baseline;

pub use baseline::{baseline_table, BaselineRow};

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::LabeledExample;
use crate::model::{predict, DecisionPolicy, LstmClassifier, ModelError};
use crate::numerics::Real;
use crate::textprep::{TextprepError, Vocabulary};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{predictions} predictions but {labels} labels")]
    LengthMismatch { predictions: usize, labels: usize },
    #[error("class index {index} out of range for {classes} classes")]
    IndexOutOfRange { index: usize, classes: usize },
    #[error("confusion matrix is empty")]
    EmptyMatrix,
    #[error("no examples to evaluate")]
    NoExamples,
    #[error("positive-class averaging needs exactly 2 classes, got {0}")]
    NotBinary(usize),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// `counts[true][predicted]` over `K` classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub num_classes: usize,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(num_classes: usize) -> Self {
        Self {
            num_classes,
            counts: vec![vec![0; num_classes]; num_classes],
        }
    }

    pub fn get(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth][predicted]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.num_classes).map(|i| self.counts[i][i]).sum()
    }

    /// Column sum: examples predicted as `class`.
    pub fn predicted_count(&self, class: usize) -> u64 {
        self.counts.iter().map(|row| row[class]).sum()
    }

    /// Row sum: examples whose true class is `class`.
    pub fn actual_count(&self, class: usize) -> u64 {
        self.counts[class].iter().sum()
    }
}

/// Tallies `(label, prediction)` pairs.
pub fn confusion(
    predictions: &[usize],
    labels: &[usize],
    num_classes: usize,
) -> Result<ConfusionMatrix, EvalError> {
    if predictions.len() != labels.len() {
        return Err(EvalError::LengthMismatch {
            predictions: predictions.len(),
            labels: labels.len(),
        });
    }
    let mut cm = ConfusionMatrix::new(num_classes);
    for (&p, &l) in predictions.iter().zip(labels) {
        for index in [p, l] {
            if index >= num_classes {
                return Err(EvalError::IndexOutOfRange {
                    index,
                    classes: num_classes,
                });
            }
        }
        cm.counts[l][p] += 1;
    }
    Ok(cm)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Averaging {
    /// Precision and recall of class 1 (binary models).
    PositiveClass,
    /// Unweighted mean of per-class precision and recall.
    Macro,
}

impl Averaging {
    pub fn for_classes(num_classes: usize) -> Self {
        if num_classes == 2 {
            Averaging::PositiveClass
        } else {
            Averaging::Macro
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub averaging: Averaging,
    /// Set when a precision or recall denominator was zero and 0 was used.
    pub degenerate: bool,
}

fn ratio(num: u64, den: u64, degenerate: &mut bool) -> f64 {
    if den == 0 {
        *degenerate = true;
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// `2PR / (P + R)`, or 0 when `P + R = 0`.
pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    }
}

pub fn metrics(cm: &ConfusionMatrix, averaging: Averaging) -> Result<MetricsReport, EvalError> {
    let total = cm.total();
    if total == 0 {
        return Err(EvalError::EmptyMatrix);
    }
    let mut degenerate = false;
    let accuracy = cm.trace() as f64 / total as f64;
    let (precision, recall) = match averaging {
        Averaging::PositiveClass => {
            if cm.num_classes != 2 {
                return Err(EvalError::NotBinary(cm.num_classes));
            }
            let tp = cm.get(1, 1);
            (
                ratio(tp, cm.predicted_count(1), &mut degenerate),
                ratio(tp, cm.actual_count(1), &mut degenerate),
            )
        }
        Averaging::Macro => {
            let k = cm.num_classes as f64;
            let (mut p_sum, mut r_sum) = (0.0, 0.0);
            for c in 0..cm.num_classes {
                let tp = cm.get(c, c);
                p_sum += ratio(tp, cm.predicted_count(c), &mut degenerate);
                r_sum += ratio(tp, cm.actual_count(c), &mut degenerate);
            }
            (p_sum / k, r_sum / k)
        }
    };
    Ok(MetricsReport {
        accuracy,
        precision,
        recall,
        f1: f1_score(precision, recall),
        averaging,
        degenerate,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub confusion: ConfusionMatrix,
    pub metrics: MetricsReport,
    pub evaluated: usize,
    /// Examples whose text produced no tokens; excluded from the metrics.
    pub skipped: usize,
    pub skipped_ids: Vec<String>,
}

/// Predicts every example and scores the predictions.
pub fn evaluate<T: Real>(
    model: &LstmClassifier<T>,
    vocab: &Vocabulary,
    examples: &[LabeledExample],
) -> Result<Evaluation, EvalError> {
    if examples.is_empty() {
        return Err(EvalError::NoExamples);
    }
    let k = model.config.num_classes;
    let mut predictions = Vec::with_capacity(examples.len());
    let mut labels = Vec::with_capacity(examples.len());
    let mut skipped_ids = Vec::new();
    for ex in examples {
        match predict(model, vocab, &ex.text, DecisionPolicy::Argmax) {
            Ok(p) => {
                predictions.push(p.class);
                labels.push(ex.label);
            }
            Err(ModelError::Text(TextprepError::EmptyTokens)) => {
                skipped_ids.push(ex.source_id.clone())
            }
            Err(e) => return Err(e.into()),
        }
    }
    let confusion = confusion(&predictions, &labels, k)?;
    let metrics = metrics(&confusion, Averaging::for_classes(k))?;
    Ok(Evaluation {
        confusion,
        metrics,
        evaluated: predictions.len(),
        skipped: skipped_ids.len(),
        skipped_ids,
    })
}

fn cell(value: Option<f64>) -> String {
    value.map_or_else(|| "-".to_string(), |v| format!("{v:.2}"))
}

/// Aligned plain-text table: this model's metrics followed by the baselines.
pub fn comparison_table(report: &MetricsReport, label: &str) -> String {
    let mut rows: Vec<[String; 6]> = vec![[
        "Source".into(),
        "Algorithm".into(),
        "Accuracy".into(),
        "Precision".into(),
        "Recall".into(),
        "F1/ROC".into(),
    ]];
    rows.push([
        label.to_string(),
        "LSTM (this run)".into(),
        cell(Some(report.accuracy)),
        cell(Some(report.precision)),
        cell(Some(report.recall)),
        cell(Some(report.f1)),
    ]);
    for b in baseline_table() {
        rows.push([
            b.source.to_string(),
            b.algorithm.to_string(),
            cell(b.accuracy),
            cell(b.precision),
            cell(b.recall),
            cell(b.f1_or_roc),
        ]);
    }
    let widths: Vec<usize> = (0..6)
        .map(|c| rows.iter().map(|r| r[c].chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for (i, row) in rows.iter().enumerate() {
        let line: Vec<String> = row
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(c, (text, &w))| {
                if c < 2 {
                    format!("{text:<w$}")
                } else {
                    format!("{text:>w$}")
                }
            })
            .collect();
        let _ = writeln!(out, "{}", line.join("  ").trim_end());
        if i == 0 {
            let _ = writeln!(
                out,
                "{}",
                "-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1))
            );
        }
    }
    out
}
