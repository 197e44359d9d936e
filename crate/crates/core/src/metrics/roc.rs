//! ROC curves and AUC, one-vs-rest per class.

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One point on a ROC curve.
pub type RocPoint = (f64, f64); // (fpr, tpr)

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassRoc {
    pub points: Vec<RocPoint>,
    pub auc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocAnalysis {
    /// Indexed by class id. `None` when the class has no positives or no
    /// negatives in `actual`, which leaves the curve undefined.
    pub per_class: Vec<Option<ClassRoc>>,
    /// Unweighted mean over the defined per-class AUCs; `None` if none are.
    pub macro_auc: Option<f64>,
}

/// ROC curve for one binary problem via a single threshold sweep.
///
/// Instances are sorted by score descending and points are emitted only when
/// the score changes, so tied scores move the curve diagonally in one step and
/// the trapezoidal AUC awards ties half credit. Returns `None` when either
/// class is absent.
pub fn roc_curve_binary(scores: &[f64], positive: &[bool]) -> Result<Option<ClassRoc>> {
    if scores.len() != positive.len() {
        return Err(Error::shape(
            "roc inputs",
            format!("{} scores", scores.len()),
            format!("{} flags", positive.len()),
        ));
    }
    let p = positive.iter().filter(|&&x| x).count();
    let n = positive.len() - p;
    if p == 0 || n == 0 {
        return Ok(None);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    // Stable sort by descending score; index order breaks exact ties, which
    // does not affect the curve because tied scores are grouped below.
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap_or(std::cmp::Ordering::Equal));

    let mut points = Vec::new();
    let mut tp = 0u64;
    let mut fp = 0u64;
    let mut prev_score = f64::INFINITY;
    for &i in &order {
        if scores[i] != prev_score {
            points.push((fp as f64 / n as f64, tp as f64 / p as f64));
            prev_score = scores[i];
        }
        if positive[i] {
            tp += 1;
        } else {
            fp += 1;
        }
    }
    points.push((1.0, 1.0));

    let mut auc = 0.0;
    for w in points.windows(2) {
        let (x0, y0) = w[0];
        let (x1, y1) = w[1];
        auc += (x1 - x0) * (y0 + y1) / 2.0;
    }
    Ok(Some(ClassRoc { points, auc }))
}

/// One-vs-rest ROC analysis from class probability columns.
pub fn roc_analysis(actual: &[u32], probabilities: ArrayView2<f64>) -> Result<RocAnalysis> {
    if actual.len() != probabilities.nrows() {
        return Err(Error::shape(
            "roc analysis inputs",
            format!("{} labels", actual.len()),
            format!("{} probability rows", probabilities.nrows()),
        ));
    }
    if actual.is_empty() {
        return Err(Error::EmptyInput);
    }
    let n_classes = probabilities.ncols();
    for &label in actual {
        if label as usize >= n_classes {
            return Err(Error::Label {
                label,
                classes: n_classes,
            });
        }
    }
    let mut per_class = Vec::with_capacity(n_classes);
    for c in 0..n_classes {
        let scores: Vec<f64> = (0..actual.len()).map(|i| probabilities[[i, c]]).collect();
        let positive: Vec<bool> = actual.iter().map(|&a| a as usize == c).collect();
        per_class.push(roc_curve_binary(&scores, &positive)?);
    }
    let defined: Vec<f64> = per_class
        .iter()
        .filter_map(|c| c.as_ref().map(|c| c.auc))
        .collect();
    let macro_auc = if defined.is_empty() {
        None
    } else {
        Some(defined.iter().sum::<f64>() / defined.len() as f64)
    };
    Ok(RocAnalysis {
        per_class,
        macro_auc,
    })
}
