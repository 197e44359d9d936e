//! Result types for a full experiment run and their persisted forms.
//!
//! Three documents leave a run: `result.json` (everything, including wall
//! times), `summary.json` (the deterministic projection that must be
//! byte-identical across reruns), and one predictions file per backbone from
//! which every reported number can be recomputed.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::ensemble::{Leaderboard, SelectionCriterion, VotingMode};
use crate::features::BackboneId;
use crate::metrics::{CvReport, MetricsBundle};
use crate::zoo::ClassifierId;

use super::config::EvalMode;

/// Outcome of top-k selection, with the scores it ranked on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HpfSelection {
    /// Winners, best first.
    pub selected: Vec<ClassifierId>,
    pub top_k: usize,
    pub criterion: SelectionCriterion,
    /// Criterion score of every configured classifier.
    pub scores: BTreeMap<ClassifierId, f64>,
}

/// Run identity: enough to tie every output file back to its inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub dataset_id: String,
    pub seed: u64,
    pub eval_mode: EvalMode,
    pub n_samples: usize,
    pub n_classes: usize,
    pub class_names: Vec<String>,
}

/// Per-(backbone, classifier) evaluation: one bundle per fold plus the
/// aggregate. Holdout mode is the single-fold case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierEval {
    pub backbone_id: BackboneId,
    pub classifier_id: ClassifierId,
    pub report: CvReport,
}

/// Per-(backbone, voting mode) ensemble evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleEval {
    pub backbone_id: BackboneId,
    pub mode: VotingMode,
    pub report: CvReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractTiming {
    pub backbone_id: BackboneId,
    pub seconds: f64,
    /// Whether the features came from the cache instead of a forward pass.
    pub cache_hit: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainTiming {
    pub backbone_id: BackboneId,
    pub classifier_id: ClassifierId,
    /// Summed over folds.
    pub train_seconds: f64,
    /// Summed over folds.
    pub predict_seconds: f64,
}

/// Wall-clock accounting per stage. Lives in `result.json` only; the summary
/// stays time-free so reruns compare byte for byte.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Timings {
    pub scan_seconds: f64,
    pub extract: Vec<ExtractTiming>,
    pub evaluate_seconds: f64,
    pub train: Vec<TrainTiming>,
    pub ensemble_seconds: f64,
    pub refit_seconds: f64,
    pub total_seconds: f64,
}

/// Everything a run produces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub provenance: Provenance,
    pub leaderboard: Leaderboard,
    pub selection: HpfSelection,
    pub classifier_evals: Vec<ClassifierEval>,
    pub ensemble_evals: Vec<EnsembleEval>,
    /// Winning voting mode; ties prefer soft.
    pub chosen_mode: VotingMode,
    /// Winning backbone; ties prefer earlier config order.
    pub chosen_backbone: BackboneId,
    /// Metrics of the chosen ensemble over the pooled out-of-fold (kfold) or
    /// held-out test (holdout) predictions.
    pub final_metrics: MetricsBundle,
    pub timings: Timings,
}

impl ExperimentResult {
    /// Mean ensemble accuracy for one (backbone, mode) cell, if evaluated.
    pub fn ensemble_accuracy(&self, backbone: BackboneId, mode: VotingMode) -> Option<f64> {
        self.ensemble_evals
            .iter()
            .find(|e| e.backbone_id == backbone && e.mode == mode)
            .map(|e| e.report.aggregate.accuracy.mean)
    }

    /// The deterministic projection persisted as `summary.json`.
    pub fn summary(&self) -> ExperimentSummary {
        let mut final_metrics = self.final_metrics.clone();
        final_metrics.prediction_seconds = 0.0;
        ExperimentSummary {
            provenance: self.provenance.clone(),
            leaderboard: self.leaderboard.clone(),
            selection: self.selection.clone(),
            ensemble_accuracy: self
                .ensemble_evals
                .iter()
                .map(|e| EnsembleAccuracy {
                    backbone_id: e.backbone_id,
                    mode: e.mode,
                    accuracy: e.report.aggregate.accuracy.mean,
                })
                .collect(),
            chosen_mode: self.chosen_mode,
            chosen_backbone: self.chosen_backbone,
            final_metrics,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleAccuracy {
    pub backbone_id: BackboneId,
    pub mode: VotingMode,
    pub accuracy: f64,
}

/// The rerun-stable view of a result: no wall times anywhere.
/// `prediction_seconds` inside the final bundle is zeroed for the same
/// reason.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub provenance: Provenance,
    pub leaderboard: Leaderboard,
    pub selection: HpfSelection,
    pub ensemble_accuracy: Vec<EnsembleAccuracy>,
    pub chosen_mode: VotingMode,
    pub chosen_backbone: BackboneId,
    pub final_metrics: MetricsBundle,
}

/// One evaluation fold as persisted: which samples were tested and their
/// ground truth. Classifier outputs reference folds by position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredFold {
    pub fold: usize,
    /// Positions into the dataset manifest.
    pub test_indices: Vec<usize>,
    pub actual: Vec<u32>,
}

/// One classifier's outputs on one fold's test samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredOutput {
    pub predicted: Vec<u32>,
    /// Rows aligned with the fold's `test_indices`, one column per class.
    pub probabilities: Vec<Vec<f64>>,
}

/// Held-out predictions from the ranking cross validation inside the training
/// portion (leak-free holdout mode only). Enough to recompute every
/// leaderboard cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankFold {
    /// Positions into the dataset manifest.
    pub test_indices: Vec<usize>,
    pub actual: Vec<u32>,
    pub predicted: Vec<u32>,
}

/// Every per-sample prediction made under one backbone. The source of truth
/// for recomputing leaderboard cells, ensemble accuracies, and the final
/// metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackbonePredictions {
    pub backbone_id: BackboneId,
    pub n_classes: usize,
    pub folds: Vec<PredFold>,
    /// Outputs per classifier, indexed like `folds`.
    pub classifiers: BTreeMap<ClassifierId, Vec<PredOutput>>,
    /// Present only when ranking used an inner cross validation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ranking: Option<BTreeMap<ClassifierId, Vec<RankFold>>>,
}
