//! Cross-validation driver and fold aggregation.

use serde::{Deserialize, Serialize};

use crate::data::FoldPlan;
use crate::error::{Error, Result};

use super::bundle::MetricsBundle;

/// Mean and population standard deviation of one metric across folds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
}

impl Stat {
    pub fn from_values(values: &[f64]) -> Stat {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        Stat {
            mean,
            std: var.sqrt(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AggregateMetrics {
    pub accuracy: Stat,
    pub macro_precision: Stat,
    pub macro_recall: Stat,
    pub macro_f1: Stat,
    pub mae: Stat,
    pub mse: Stat,
    pub rmse: Stat,
    /// Aggregated only when every fold has a defined macro AUC.
    pub macro_auc: Option<Stat>,
    pub prediction_seconds: Stat,
}

/// Per-fold results plus their aggregate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub folds: Vec<MetricsBundle>,
    pub aggregate: AggregateMetrics,
}

/// Aggregate fold bundles into mean and population std per metric.
pub fn aggregate_folds(folds: &[MetricsBundle]) -> Result<AggregateMetrics> {
    if folds.is_empty() {
        return Err(Error::EmptyInput);
    }
    let collect = |f: &dyn Fn(&MetricsBundle) -> f64| -> Stat {
        Stat::from_values(&folds.iter().map(f).collect::<Vec<_>>())
    };
    let aucs: Option<Vec<f64>> = folds
        .iter()
        .map(|b| b.roc.as_ref().and_then(|r| r.macro_auc))
        .collect();
    Ok(AggregateMetrics {
        accuracy: collect(&|b| b.accuracy),
        macro_precision: collect(&|b| b.macro_precision),
        macro_recall: collect(&|b| b.macro_recall),
        macro_f1: collect(&|b| b.macro_f1),
        mae: collect(&|b| b.errors.mae),
        mse: collect(&|b| b.errors.mse),
        rmse: collect(&|b| b.errors.rmse),
        macro_auc: aucs.map(|v| Stat::from_values(&v)),
        prediction_seconds: collect(&|b| b.prediction_seconds),
    })
}

/// Run an evaluation closure over every fold of a plan.
///
/// The closure receives `(fold, train_indices, test_indices)` and returns the
/// fold's metrics. A failing fold is wrapped with its index so the caller
/// knows exactly where the run died.
pub fn cross_validate<F>(plan: &FoldPlan, mut eval_fold: F) -> Result<CvReport>
where
    F: FnMut(usize, &[usize], &[usize]) -> Result<MetricsBundle>,
{
    let mut folds = Vec::with_capacity(plan.k);
    for f in 0..plan.k {
        let train = plan.train_indices(f);
        let test = plan.test_indices(f);
        let bundle = eval_fold(f, &train, test).map_err(|source| Error::InFold {
            fold: f,
            source: Box::new(source),
        })?;
        folds.push(bundle);
    }
    let aggregate = aggregate_folds(&folds)?;
    Ok(CvReport { folds, aggregate })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::label_map::LabelMap;
    use crate::data::manifest::{DatasetManifest, ManifestEntry};
    use crate::data::make_folds;
    use crate::metrics::bundle::evaluate;
    use std::path::PathBuf;

    fn plan() -> (DatasetManifest, FoldPlan) {
        let map = LabelMap::from_names(vec!["a", "b"]).unwrap();
        let entries = (0..20)
            .map(|i| ManifestEntry {
                path: format!("{}/{i:03}.png", if i < 10 { "a" } else { "b" }),
                label_id: u32::from(i >= 10),
                bytes: 0,
            })
            .collect();
        let manifest =
            DatasetManifest::from_entries(PathBuf::from("/synthetic"), map, entries).unwrap();
        let plan = make_folds(&manifest, 4, 9).unwrap();
        (manifest, plan)
    }

    #[test]
    fn runs_every_fold_and_aggregates() {
        let (manifest, plan) = plan();
        let labels = manifest.labels();
        let report = cross_validate(&plan, |_f, train, test| {
            assert_eq!(train.len() + test.len(), manifest.len());
            let actual: Vec<u32> = test.iter().map(|&i| labels[i]).collect();
            // A fake model that always predicts class 0.
            let predicted = vec![0u32; test.len()];
            evaluate(&actual, &predicted, None, 2, 0.0)
        })
        .unwrap();
        assert_eq!(report.folds.len(), 4);
        // Half of each fold is class 0.
        assert!((report.aggregate.accuracy.mean - 0.5).abs() < 1e-12);
        assert!(report.aggregate.accuracy.std.abs() < 1e-12);
        assert!(report.aggregate.macro_auc.is_none());
    }

    #[test]
    fn fold_errors_carry_their_index() {
        let (_manifest, plan) = plan();
        let err = cross_validate(&plan, |f, _train, _test| {
            if f == 2 {
                Err(Error::EmptyInput)
            } else {
                evaluate(&[0, 1], &[0, 1], None, 2, 0.0)
            }
        })
        .unwrap_err();
        match err {
            Error::InFold { fold, source } => {
                assert_eq!(fold, 2);
                assert!(matches!(*source, Error::EmptyInput));
            }
            other => panic!("expected fold error, got {other}"),
        }
    }

    #[test]
    fn stat_from_values_is_population_std() {
        let s = Stat::from_values(&[1.0, 2.0, 3.0, 4.0]);
        assert!((s.mean - 2.5).abs() < 1e-15);
        // Population variance of 1..4 is 1.25.
        assert!((s.std - 1.25f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn aggregate_requires_at_least_one_fold() {
        assert!(matches!(aggregate_folds(&[]), Err(Error::EmptyInput)));
    }
}
