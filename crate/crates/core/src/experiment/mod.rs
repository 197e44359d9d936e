//! The experiment layer: configuration, orchestration, reporting, and
//! deployment bundles built on the data/features/zoo/metrics/ensemble
//! modules.

pub mod bundle;
pub mod config;
pub mod plot;
pub mod report;
pub mod result;
pub mod runner;

pub use bundle::{load_bundle, predict_single, save_bundle, BundleManifest, LoadedBundle, SinglePrediction};
pub use config::{EvalMode, ExperimentConfig};
pub use report::{emit_report, ReportManifest};
pub use result::{ExperimentResult, ExperimentSummary, HpfSelection, Timings};
pub use runner::{load_result, run_experiment};
