use serde::{Deserialize, Serialize};

/// One published result; `None` where no value was reported.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineRow {
    pub source: &'static str,
    pub algorithm: &'static str,
    pub accuracy: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    /// The published column mixes F1 and ROC values; carried as-is.
    pub f1_or_roc: Option<f64>,
}

const fn row(
    source: &'static str,
    algorithm: &'static str,
    accuracy: f64,
    precision: Option<f64>,
    recall: Option<f64>,
    f1_or_roc: Option<f64>,
) -> BaselineRow {
    BaselineRow {
        source,
        algorithm,
        accuracy: Some(accuracy),
        precision,
        recall,
        f1_or_roc,
    }
}

/// Reference results for LSTM and classical classifiers on dark-web
/// threat data, in published order.
pub fn baseline_table() -> Vec<BaselineRow> {
    vec![
        row("My Model", "LSTM", 0.94, Some(0.90), Some(0.91), Some(0.91)),
        row(
            "My Model",
            "Random Forest (RFC)",
            0.80,
            Some(0.95),
            Some(0.95),
            Some(0.75),
        ),
        row("Dong et al.", "SVM", 0.81, Some(0.90), None, None),
        row("Azene et al.", "Naive Bayes", 0.65, None, None, Some(0.85)),
        row("Azene et al.", "Random Tree", 0.84, None, None, Some(0.71)),
        row(
            "Azene et al.",
            "Random Forest",
            0.97,
            None,
            None,
            Some(0.91),
        ),
        row(
            "Arora et al.",
            "Random Forest(RFC)",
            0.80,
            Some(0.81),
            Some(0.80),
            Some(0.79),
        ),
    ]
}
