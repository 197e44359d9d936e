//! The full per-evaluation metric set, computed in one call.

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::error::Result;

use super::confusion::{classification_metrics, ClassPrf, ConfusionMatrix};
use super::regression::{regression_errors, RegressionErrors};
use super::roc::{roc_analysis, RocAnalysis};

/// Everything reported for one evaluation (a fold, a holdout test set, or a
/// pooled run).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsBundle {
    pub accuracy: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub per_class: Vec<ClassPrf>,
    pub errors: RegressionErrors,
    pub confusion: ConfusionMatrix,
    /// Present when probabilities were supplied.
    pub roc: Option<RocAnalysis>,
    /// Wall-clock seconds spent producing the predictions being scored.
    pub prediction_seconds: f64,
}

/// Score predictions against ground truth.
///
/// `probabilities` unlocks the ROC analysis; hard-vote predictions pass
/// `None` and simply get no curves.
pub fn evaluate(
    actual: &[u32],
    predicted: &[u32],
    probabilities: Option<ArrayView2<f64>>,
    n_classes: usize,
    prediction_seconds: f64,
) -> Result<MetricsBundle> {
    let confusion = ConfusionMatrix::from_labels(actual, predicted, n_classes)?;
    let cls = classification_metrics(&confusion)?;
    let errors = regression_errors(actual, predicted)?;
    let roc = match probabilities {
        Some(probs) => Some(roc_analysis(actual, probs)?),
        None => None,
    };
    Ok(MetricsBundle {
        accuracy: cls.accuracy,
        macro_precision: cls.macro_precision,
        macro_recall: cls.macro_recall,
        macro_f1: cls.macro_f1,
        per_class: cls.per_class,
        errors,
        confusion,
        roc,
        prediction_seconds,
    })
}
