//! Error metrics over label ids treated as numeric values.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressionErrors {
    pub mae: f64,
    pub mse: f64,
    pub rmse: f64,
}

/// Mean absolute error, mean squared error, and root mean squared error of
/// predicted label ids against actual ones.
///
/// MAE takes absolute differences. With 0/1 labels that makes MAE equal the
/// misclassification rate, and MAE <= RMSE holds universally; a signed mean
/// would satisfy neither.
pub fn regression_errors(actual: &[u32], predicted: &[u32]) -> Result<RegressionErrors> {
    if actual.len() != predicted.len() {
        return Err(Error::shape(
            "regression error inputs",
            format!("{} values", actual.len()),
            format!("{} values", predicted.len()),
        ));
    }
    if actual.is_empty() {
        return Err(Error::EmptyInput);
    }
    let n = actual.len() as f64;
    let mut abs_sum = 0.0f64;
    let mut sq_sum = 0.0f64;
    for (&a, &p) in actual.iter().zip(predicted) {
        let diff = a as f64 - p as f64;
        abs_sum += diff.abs();
        sq_sum += diff * diff;
    }
    let mae = abs_sum / n;
    let mse = sq_sum / n;
    Ok(RegressionErrors {
        mae,
        mse,
        rmse: mse.sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn known_values() {
        // diffs: 0, 1, -2 -> mae = 1, mse = 5/3.
        let e = regression_errors(&[0, 1, 2], &[0, 0, 4]).unwrap();
        assert!((e.mae - 1.0).abs() < 1e-15);
        assert!((e.mse - 5.0 / 3.0).abs() < 1e-15);
        assert_eq!(e.rmse, e.mse.sqrt());
    }

    #[test]
    fn perfect_predictions_are_zero() {
        let e = regression_errors(&[3, 1, 4], &[3, 1, 4]).unwrap();
        assert_eq!(e.mae, 0.0);
        assert_eq!(e.mse, 0.0);
        assert_eq!(e.rmse, 0.0);
    }

    #[test]
    fn validation() {
        assert!(matches!(
            regression_errors(&[], &[]),
            Err(Error::EmptyInput)
        ));
        assert!(matches!(
            regression_errors(&[1], &[1, 2]),
            Err(Error::Shape { .. })
        ));
    }

    proptest! {
        #[test]
        fn mae_never_exceeds_rmse(
            pairs in proptest::collection::vec((0u32..6, 0u32..6), 1..200)
        ) {
            let actual: Vec<u32> = pairs.iter().map(|p| p.0).collect();
            let predicted: Vec<u32> = pairs.iter().map(|p| p.1).collect();
            let e = regression_errors(&actual, &predicted).unwrap();
            prop_assert!(e.mae <= e.rmse + 1e-12);
            prop_assert!((e.rmse - e.mse.sqrt()).abs() <= 1e-12);
        }

        #[test]
        fn binary_mae_equals_error_rate(
            pairs in proptest::collection::vec((0u32..2, 0u32..2), 1..200)
        ) {
            let actual: Vec<u32> = pairs.iter().map(|p| p.0).collect();
            let predicted: Vec<u32> = pairs.iter().map(|p| p.1).collect();
            let e = regression_errors(&actual, &predicted).unwrap();
            let wrong = pairs.iter().filter(|p| p.0 != p.1).count() as f64;
            let error_rate = wrong / pairs.len() as f64;
            prop_assert!((e.mae - error_rate).abs() <= 1e-12);
        }
    }
}
