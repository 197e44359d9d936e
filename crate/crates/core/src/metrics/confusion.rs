//! Confusion matrices and the classification metrics derived from them.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// K x K confusion counts; rows are actual classes, columns predicted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub n_classes: usize,
    /// Row-major counts, `counts[actual][predicted]`.
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn from_labels(actual: &[u32], predicted: &[u32], n_classes: usize) -> Result<Self> {
        if actual.len() != predicted.len() {
            return Err(Error::shape(
                "confusion matrix inputs",
                format!("{} predictions", actual.len()),
                format!("{} predictions", predicted.len()),
            ));
        }
        if n_classes == 0 {
            return Err(Error::Label {
                label: 0,
                classes: 0,
            });
        }
        let mut counts = vec![vec![0u64; n_classes]; n_classes];
        for (&a, &p) in actual.iter().zip(predicted) {
            for label in [a, p] {
                if label as usize >= n_classes {
                    return Err(Error::Label {
                        label,
                        classes: n_classes,
                    });
                }
            }
            counts[a as usize][p as usize] += 1;
        }
        Ok(ConfusionMatrix { n_classes, counts })
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    /// Sum counts from another matrix of the same shape, e.g. to pool folds.
    pub fn add(&mut self, other: &ConfusionMatrix) -> Result<()> {
        if other.n_classes != self.n_classes {
            return Err(Error::shape(
                "confusion matrix pooling",
                format!("{} classes", self.n_classes),
                format!("{} classes", other.n_classes),
            ));
        }
        for (mine, theirs) in self.counts.iter_mut().zip(&other.counts) {
            for (m, t) in mine.iter_mut().zip(theirs) {
                *m += t;
            }
        }
        Ok(())
    }

    /// One-vs-rest counts for class `c`: (tp, fp, fn, tn).
    pub fn class_counts(&self, c: usize) -> (u64, u64, u64, u64) {
        let tp = self.counts[c][c];
        let fp: u64 = (0..self.n_classes)
            .filter(|&r| r != c)
            .map(|r| self.counts[r][c])
            .sum();
        let fn_: u64 = (0..self.n_classes)
            .filter(|&p| p != c)
            .map(|p| self.counts[c][p])
            .sum();
        let tn = self.total() - tp - fp - fn_;
        (tp, fp, fn_, tn)
    }

    /// Counts as percentages of each row (actual class). Empty rows give 0.
    pub fn row_percentages(&self) -> Array2<f64> {
        let mut out = Array2::<f64>::zeros((self.n_classes, self.n_classes));
        for r in 0..self.n_classes {
            let row_total: u64 = self.counts[r].iter().sum();
            if row_total > 0 {
                for c in 0..self.n_classes {
                    out[[r, c]] = self.counts[r][c] as f64 / row_total as f64 * 100.0;
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassPrf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationMetrics {
    pub accuracy: f64,
    pub per_class: Vec<ClassPrf>,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
}

/// Ratio with the 0/0 convention used throughout: empty denominators give 0
/// instead of NaN, so a class that never appears scores zero rather than
/// poisoning the macro averages.
fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Accuracy plus one-vs-rest precision/recall/F1 per class and their
/// unweighted macro averages over all `n_classes`.
pub fn classification_metrics(cm: &ConfusionMatrix) -> Result<ClassificationMetrics> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::EmptyInput);
    }
    let correct: u64 = (0..cm.n_classes).map(|c| cm.counts[c][c]).sum();
    let accuracy = correct as f64 / total as f64;

    let mut per_class = Vec::with_capacity(cm.n_classes);
    for c in 0..cm.n_classes {
        let (tp, fp, fn_, _tn) = cm.class_counts(c);
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        per_class.push(ClassPrf {
            precision,
            recall,
            f1,
        });
    }
    let k = cm.n_classes as f64;
    Ok(ClassificationMetrics {
        accuracy,
        macro_precision: per_class.iter().map(|c| c.precision).sum::<f64>() / k,
        macro_recall: per_class.iter().map(|c| c.recall).sum::<f64>() / k,
        macro_f1: per_class.iter().map(|c| c.f1).sum::<f64>() / k,
        per_class,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_binary_case() {
        // actual:    1 1 1 0 0
        // predicted: 1 0 1 0 1
        let cm = ConfusionMatrix::from_labels(&[1, 1, 1, 0, 0], &[1, 0, 1, 0, 1], 2).unwrap();
        assert_eq!(cm.counts, vec![vec![1, 1], vec![1, 2]]);
        let m = classification_metrics(&cm).unwrap();
        assert!((m.accuracy - 0.6).abs() < 1e-15);
        // Class 1: tp=2 fp=1 fn=1 -> p=2/3 r=2/3 f1=2/3.
        assert!((m.per_class[1].precision - 2.0 / 3.0).abs() < 1e-15);
        assert!((m.per_class[1].recall - 2.0 / 3.0).abs() < 1e-15);
        assert!((m.per_class[1].f1 - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn perfect_predictions_score_one() {
        let actual = [0u32, 1, 2, 0, 1, 2];
        let cm = ConfusionMatrix::from_labels(&actual, &actual, 3).unwrap();
        let m = classification_metrics(&cm).unwrap();
        assert_eq!(m.accuracy, 1.0);
        assert_eq!(m.macro_precision, 1.0);
        assert_eq!(m.macro_recall, 1.0);
        assert_eq!(m.macro_f1, 1.0);
    }

    #[test]
    fn absent_class_contributes_zero_not_nan() {
        // Class 2 never appears in actual or predicted.
        let cm = ConfusionMatrix::from_labels(&[0, 1, 0], &[0, 1, 1], 3).unwrap();
        let m = classification_metrics(&cm).unwrap();
        assert_eq!(m.per_class[2].precision, 0.0);
        assert_eq!(m.per_class[2].recall, 0.0);
        assert_eq!(m.per_class[2].f1, 0.0);
        assert!(m.macro_f1.is_finite());
        // Recalls are 1/2 (one of two zeros misread), 1, and 0; the macro
        // average divides by all three classes.
        let expected_macro_r = (0.5 + 1.0 + 0.0) / 3.0;
        assert!((m.macro_recall - expected_macro_r).abs() < 1e-15);
    }

    #[test]
    fn row_percentages_sum_to_hundred_for_nonempty_rows() {
        let cm = ConfusionMatrix::from_labels(&[0, 0, 0, 1], &[0, 1, 1, 1], 2).unwrap();
        let pct = cm.row_percentages();
        for r in 0..2 {
            let row_sum: f64 = (0..2).map(|c| pct[[r, c]]).sum();
            assert!((row_sum - 100.0).abs() < 1e-12);
        }
        assert!((pct[[0, 1]] - 200.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn pooling_adds_counts() {
        let a = ConfusionMatrix::from_labels(&[0, 1], &[0, 1], 2).unwrap();
        let b = ConfusionMatrix::from_labels(&[0, 1], &[1, 1], 2).unwrap();
        let mut pooled = a.clone();
        pooled.add(&b).unwrap();
        assert_eq!(pooled.total(), 4);
        assert_eq!(pooled.counts[0][1], 1);
    }

    #[test]
    fn input_validation() {
        assert!(matches!(
            ConfusionMatrix::from_labels(&[0], &[0, 1], 2),
            Err(Error::Shape { .. })
        ));
        assert!(matches!(
            ConfusionMatrix::from_labels(&[5], &[0], 2),
            Err(Error::Label { label: 5, .. })
        ));
        let empty = ConfusionMatrix::from_labels(&[], &[], 2).unwrap();
        assert!(matches!(
            classification_metrics(&empty),
            Err(Error::EmptyInput)
        ));
    }
}
