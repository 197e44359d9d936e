//! Evaluation metrics: confusion-matrix statistics, label-distance errors,
//! ROC analysis, and cross-validation aggregation.

pub mod bundle;
pub mod confusion;
pub mod crossval;
pub mod regression;
pub mod roc;

pub use bundle::{evaluate, MetricsBundle};
pub use confusion::{classification_metrics, ClassPrf, ClassificationMetrics, ConfusionMatrix};
pub use crossval::{aggregate_folds, cross_validate, AggregateMetrics, CvReport, Stat};
pub use regression::{regression_errors, RegressionErrors};
pub use roc::{roc_analysis, roc_curve_binary, ClassRoc, RocAnalysis, RocPoint};
