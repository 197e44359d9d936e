//! Experiment configuration: the single TOML document that pins a whole run.
//!
//! Everything a run depends on lives here: dataset location and class order,
//! backbones, classifier overrides, evaluation protocol, selection and
//! ensemble settings. [`ExperimentConfig::config_hash`] fingerprints the
//! resolved document so results can be traced back to the exact settings that
//! produced them.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{LabelMap, PreprocessConfig};
use crate::ensemble::{validate_weights, SelectionCriterion, VotingMode};
use crate::error::{Error, Result};
use crate::features::{BackboneId, BackboneSpec};
use crate::util::sha256_hex;
use crate::zoo::{ClassifierId, ClassifierSpec};

/// How the dataset is carved up for evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalMode {
    /// Single stratified train/test split.
    Holdout,
    /// Stratified k-fold cross validation over the whole dataset.
    Kfold,
}

impl std::fmt::Display for EvalMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            EvalMode::Holdout => "holdout",
            EvalMode::Kfold => "kfold",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    /// Directory holding one subdirectory per class.
    pub root: PathBuf,
    /// Class names in label-id order; ids are assigned 0..K-1.
    pub classes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationConfig {
    #[serde(default = "default_mode")]
    pub mode: EvalMode,
    /// Fold count for kfold mode.
    #[serde(default = "default_k")]
    pub k: usize,
    /// Train share for holdout mode.
    #[serde(default = "default_train_fraction")]
    pub train_fraction: f64,
    /// Master seed; every random choice in the run derives from it.
    #[serde(default = "default_seed")]
    pub seed: u64,
}

fn default_mode() -> EvalMode {
    EvalMode::Kfold
}

fn default_k() -> usize {
    10
}

fn default_train_fraction() -> f64 {
    0.8
}

fn default_seed() -> u64 {
    42
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        EvaluationConfig {
            mode: default_mode(),
            k: default_k(),
            train_fraction: default_train_fraction(),
            seed: default_seed(),
        }
    }
}

/// Classifier entry as written in the config file. Differs from
/// [`ClassifierSpec`] only in that the seed is optional: an absent seed
/// resolves to the evaluation seed, and staying `None` here keeps the file
/// round-trip lossless.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierEntry {
    pub classifier_id: ClassifierId,
    #[serde(default, skip_serializing_if = "std::collections::BTreeMap::is_empty")]
    pub hyperparams: std::collections::BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

/// Top-k selection settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HpfConfig {
    #[serde(default = "default_top_k")]
    pub top_k: usize,
    #[serde(flatten, default)]
    pub criterion: SelectionCriterion,
    /// Rank classifiers by the same accuracies later reported (leaking test
    /// data into selection) instead of by cross validation inside the
    /// training portion. Only meaningful in holdout mode: under kfold the
    /// out-of-fold accuracies are both the report and the ranking source.
    #[serde(default)]
    pub paper_faithful: bool,
}

fn default_top_k() -> usize {
    3
}

impl Default for HpfConfig {
    fn default() -> Self {
        HpfConfig {
            top_k: default_top_k(),
            criterion: SelectionCriterion::default(),
            paper_faithful: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    /// Voting modes to evaluate. The best one is chosen per backbone.
    #[serde(default = "default_modes")]
    pub modes: Vec<VotingMode>,
    /// Member weights aligned with selection order; absent means uniform.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
}

fn default_modes() -> Vec<VotingMode> {
    vec![VotingMode::Hard, VotingMode::Soft]
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        EnsembleConfig {
            modes: default_modes(),
            weights: None,
        }
    }
}

fn default_cache_dir() -> PathBuf {
    PathBuf::from("cache")
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

/// The full run recipe. Loaded from TOML, saved back losslessly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default = "default_cache_dir")]
    pub cache_dir: PathBuf,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    pub dataset: DatasetConfig,
    #[serde(default)]
    pub preprocess: PreprocessConfig,
    pub backbones: Vec<BackboneSpec>,
    /// Empty means the full registry with the evaluation seed.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub classifiers: Vec<ClassifierEntry>,
    #[serde(default)]
    pub evaluation: EvaluationConfig,
    #[serde(default)]
    pub hpf: HpfConfig,
    #[serde(default)]
    pub ensemble: EnsembleConfig,
}

impl ExperimentConfig {
    /// Minimal config for a dataset and one backbone; everything else at
    /// defaults.
    pub fn new(root: impl Into<PathBuf>, classes: Vec<String>, backbones: Vec<BackboneSpec>) -> Self {
        ExperimentConfig {
            cache_dir: default_cache_dir(),
            output_dir: default_output_dir(),
            dataset: DatasetConfig {
                root: root.into(),
                classes,
            },
            preprocess: PreprocessConfig::default(),
            backbones,
            classifiers: Vec::new(),
            evaluation: EvaluationConfig::default(),
            hpf: HpfConfig::default(),
            ensemble: EnsembleConfig::default(),
        }
    }

    pub fn label_map(&self) -> Result<LabelMap> {
        LabelMap::from_names(self.dataset.classes.clone())
    }

    /// The classifier specs this config resolves to: the explicit entries, or
    /// the whole registry when none are given. Entry seeds default to the
    /// evaluation seed.
    pub fn classifier_specs(&self) -> Vec<ClassifierSpec> {
        if self.classifiers.is_empty() {
            return ClassifierId::ALL
                .iter()
                .map(|&id| ClassifierSpec::new(id, self.evaluation.seed))
                .collect();
        }
        self.classifiers
            .iter()
            .map(|entry| ClassifierSpec {
                classifier_id: entry.classifier_id,
                hyperparams: entry.hyperparams.clone(),
                seed: entry.seed.unwrap_or(self.evaluation.seed),
            })
            .collect()
    }

    pub fn classifier_ids(&self) -> Vec<ClassifierId> {
        self.classifier_specs().iter().map(|s| s.classifier_id).collect()
    }

    pub fn backbone_ids(&self) -> Vec<BackboneId> {
        self.backbones.iter().map(|b| b.backbone_id).collect()
    }

    /// Structural validation. Path existence is checked at run time, not
    /// here, so a config for an absent dataset still parses and saves.
    pub fn validate(&self) -> Result<()> {
        if self.dataset.classes.len() < 2 {
            return Err(Error::Config(format!(
                "need at least 2 classes, got {}",
                self.dataset.classes.len()
            )));
        }
        self.label_map()?;
        self.preprocess.validate()?;

        if self.backbones.is_empty() {
            return Err(Error::Config("need at least 1 backbone".into()));
        }
        let mut seen_backbones = BTreeSet::new();
        for spec in &self.backbones {
            if !seen_backbones.insert(spec.backbone_id) {
                return Err(Error::Config(format!(
                    "backbone {} is listed twice",
                    spec.backbone_id
                )));
            }
            match (spec.backbone_id, &spec.model_path) {
                (BackboneId::Mock, Some(path)) => {
                    return Err(Error::Config(format!(
                        "mock backbone takes no model_path, but {} was given",
                        path.display()
                    )));
                }
                (BackboneId::Mock, None) => {}
                (id, None) => {
                    return Err(Error::Config(format!("backbone {id} needs a model_path")));
                }
                (_, Some(_)) => {}
            }
        }

        let specs = self.classifier_specs();
        let mut seen_classifiers = BTreeSet::new();
        for spec in &specs {
            if !seen_classifiers.insert(spec.classifier_id) {
                return Err(Error::Config(format!(
                    "classifier {} is listed twice",
                    spec.classifier_id
                )));
            }
            spec.validate()?;
        }
        if self.hpf.top_k == 0 {
            return Err(Error::Config("hpf.top_k must be at least 1".into()));
        }
        if specs.len() < self.hpf.top_k {
            return Err(Error::Config(format!(
                "hpf.top_k is {} but only {} classifier(s) are configured",
                self.hpf.top_k,
                specs.len()
            )));
        }
        if let SelectionCriterion::PerBackbone(backbone) = self.hpf.criterion {
            if !self.backbone_ids().contains(&backbone) {
                return Err(Error::Config(format!(
                    "hpf criterion refers to backbone {backbone}, which is not configured"
                )));
            }
        }

        match self.evaluation.mode {
            EvalMode::Kfold => {
                if self.evaluation.k < 2 {
                    return Err(Error::Config(format!(
                        "evaluation.k must be at least 2, got {}",
                        self.evaluation.k
                    )));
                }
            }
            EvalMode::Holdout => {
                let f = self.evaluation.train_fraction;
                if !(f > 0.0 && f < 1.0) {
                    return Err(Error::Config(format!(
                        "evaluation.train_fraction must be in (0, 1), got {f}"
                    )));
                }
            }
        }

        if self.ensemble.modes.is_empty() {
            return Err(Error::Config("ensemble.modes must not be empty".into()));
        }
        let mut seen_modes = BTreeSet::new();
        for &mode in &self.ensemble.modes {
            if !seen_modes.insert(mode.as_str()) {
                return Err(Error::Config(format!("ensemble mode {mode} is listed twice")));
            }
        }
        if let Some(weights) = &self.ensemble.weights {
            validate_weights(weights, self.hpf.top_k)?;
        }
        Ok(())
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self)
            .map_err(|e| Error::Config(format!("config does not serialize: {e}")))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::util::atomic_write(path, self.to_toml_string()?.as_bytes())
    }

    pub fn load(path: &Path) -> Result<ExperimentConfig> {
        let bytes = crate::util::read_bytes(path)?;
        let text = String::from_utf8(bytes)
            .map_err(|_| Error::Config(format!("{} is not UTF-8", path.display())))?;
        let config: ExperimentConfig = toml::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    /// Hex SHA-256 of the resolved config as canonical JSON. Field order is
    /// declaration order and maps are sorted, so the hash is stable.
    pub fn config_hash(&self) -> Result<String> {
        let bytes = serde_json::to_vec(self).map_err(|source| Error::Json {
            context: "experiment config".into(),
            source,
        })?;
        Ok(sha256_hex(&bytes))
    }
}
