//! The classifier zoo: six classical learners with one contract.
//!
//! Every classifier trains on an `n x d` f32 feature matrix with u32 labels,
//! produces calibrated-ish class probabilities, and predicts the argmax of
//! those probabilities. Training is deterministic given the spec seed; two
//! identical calls yield bitwise identical models.

pub mod boost;
pub mod forest;
pub mod logistic;
pub mod mlp;
pub mod svm;
pub mod tree;

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::util::{atomic_write, read_bytes, sha256_hex};

pub const SPEC_FILE: &str = "spec.json";
pub const STATE_FILE: &str = "state.json";

/// Classifier identities, in canonical registry order.
///
/// Registry order doubles as the tie-break order wherever ranked scores come
/// out equal, so it is part of the crate's observable behavior.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassifierId {
    Rf,
    Svm,
    Lr,
    Mlp,
    Xgb,
    Lgb,
}

impl ClassifierId {
    pub const ALL: [ClassifierId; 6] = [
        ClassifierId::Rf,
        ClassifierId::Svm,
        ClassifierId::Lr,
        ClassifierId::Mlp,
        ClassifierId::Xgb,
        ClassifierId::Lgb,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ClassifierId::Rf => "rf",
            ClassifierId::Svm => "svm",
            ClassifierId::Lr => "lr",
            ClassifierId::Mlp => "mlp",
            ClassifierId::Xgb => "xgb",
            ClassifierId::Lgb => "lgb",
        }
    }

    /// Upper-case label used in report tables.
    pub fn display_name(&self) -> &'static str {
        match self {
            ClassifierId::Rf => "RF",
            ClassifierId::Svm => "SVM",
            ClassifierId::Lr => "LR",
            ClassifierId::Mlp => "MLP",
            ClassifierId::Xgb => "XGB",
            ClassifierId::Lgb => "LGB",
        }
    }

    pub fn registry_index(&self) -> usize {
        Self::ALL.iter().position(|c| c == self).expect("id is in ALL")
    }
}

impl fmt::Display for ClassifierId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ClassifierId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rf" => Ok(ClassifierId::Rf),
            "svm" => Ok(ClassifierId::Svm),
            "lr" => Ok(ClassifierId::Lr),
            "mlp" => Ok(ClassifierId::Mlp),
            "xgb" => Ok(ClassifierId::Xgb),
            "lgb" => Ok(ClassifierId::Lgb),
            other => Err(Error::Config(format!("unknown classifier id {other:?}"))),
        }
    }
}

/// Hyperparameter schema entry: name, default, and a validity check.
struct ParamSchema {
    name: &'static str,
    default: f64,
    check: fn(f64) -> bool,
    requirement: &'static str,
}

fn positive(v: f64) -> bool {
    v > 0.0
}

fn non_negative(v: f64) -> bool {
    v >= 0.0
}

fn positive_integer(v: f64) -> bool {
    v > 0.0 && v.fract() == 0.0
}

fn non_negative_integer(v: f64) -> bool {
    v >= 0.0 && v.fract() == 0.0
}

fn schema_for(id: ClassifierId) -> &'static [ParamSchema] {
    macro_rules! p {
        ($name:literal, $default:expr, $check:ident, $req:literal) => {
            ParamSchema {
                name: $name,
                default: $default,
                check: $check,
                requirement: $req,
            }
        };
    }
    match id {
        ClassifierId::Rf => &[
            p!("n_trees", 100.0, positive_integer, "a positive integer"),
            p!("max_depth", 0.0, non_negative_integer, "a non-negative integer (0 = unlimited)"),
            p!("min_samples_leaf", 1.0, positive_integer, "a positive integer"),
        ],
        ClassifierId::Svm => &[
            p!("c", 1.0, positive, "positive"),
            p!("gamma", 0.0, non_negative, "non-negative (0 = 1 / (d * var))"),
            p!("tolerance", 1e-3, positive, "positive"),
        ],
        ClassifierId::Lr => &[
            p!("learning_rate", 0.05, positive, "positive"),
            p!("l2", 1e-4, non_negative, "non-negative"),
            p!("epochs", 300.0, positive_integer, "a positive integer"),
        ],
        ClassifierId::Mlp => &[
            p!("hidden", 100.0, positive_integer, "a positive integer"),
            p!("learning_rate", 1e-3, positive, "positive"),
            p!("l2", 1e-4, non_negative, "non-negative"),
            p!("epochs", 150.0, positive_integer, "a positive integer"),
            p!("batch_size", 32.0, positive_integer, "a positive integer"),
        ],
        ClassifierId::Xgb => &[
            p!("n_rounds", 100.0, positive_integer, "a positive integer"),
            p!("learning_rate", 0.3, positive, "positive"),
            p!("max_depth", 6.0, positive_integer, "a positive integer"),
            p!("lambda", 1.0, non_negative, "non-negative"),
            p!("gamma", 0.0, non_negative, "non-negative"),
            p!("min_child_weight", 1.0, non_negative, "non-negative"),
        ],
        ClassifierId::Lgb => &[
            p!("n_rounds", 100.0, positive_integer, "a positive integer"),
            p!("learning_rate", 0.1, positive, "positive"),
            p!("num_leaves", 31.0, positive_integer, "a positive integer"),
            p!("min_data_in_leaf", 20.0, positive_integer, "a positive integer"),
            p!("max_bins", 255.0, positive_integer, "a positive integer"),
            p!("lambda", 0.0, non_negative, "non-negative"),
        ],
    }
}

/// What to train: which classifier, overridden hyperparameters, and the seed
/// for its random choices. Parameters not present in the map use documented
/// defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierSpec {
    pub classifier_id: ClassifierId,
    #[serde(default)]
    pub hyperparams: BTreeMap<String, f64>,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

fn default_seed() -> u64 {
    42
}

impl ClassifierSpec {
    pub fn new(classifier_id: ClassifierId, seed: u64) -> Self {
        ClassifierSpec {
            classifier_id,
            hyperparams: BTreeMap::new(),
            seed,
        }
    }

    /// Check every supplied hyperparameter against the classifier's schema.
    pub fn validate(&self) -> Result<()> {
        let schema = schema_for(self.classifier_id);
        for (name, &value) in &self.hyperparams {
            let entry = schema.iter().find(|s| s.name == name.as_str()).ok_or_else(|| {
                Error::UnknownHyperparam {
                    classifier: self.classifier_id.to_string(),
                    name: name.clone(),
                }
            })?;
            if !value.is_finite() || !(entry.check)(value) {
                return Err(Error::InvalidHyperparam {
                    classifier: self.classifier_id.to_string(),
                    name: name.clone(),
                    value,
                    reason: format!("must be {}", entry.requirement),
                });
            }
        }
        Ok(())
    }

    /// Effective value of `name`: the override if present, else the default.
    /// Panics on names absent from the schema; call sites use literals.
    pub fn param(&self, name: &str) -> f64 {
        let schema = schema_for(self.classifier_id);
        let entry = schema
            .iter()
            .find(|s| s.name == name)
            .unwrap_or_else(|| panic!("{name:?} is not in the {} schema", self.classifier_id));
        self.hyperparams.get(name).copied().unwrap_or(entry.default)
    }

    pub fn param_usize(&self, name: &str) -> usize {
        self.param(name) as usize
    }

    /// Defaults of every schema parameter, e.g. for documentation output.
    pub fn defaults(id: ClassifierId) -> BTreeMap<String, f64> {
        schema_for(id)
            .iter()
            .map(|s| (s.name.to_string(), s.default))
            .collect()
    }
}

/// Trained weights, tagged by family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ModelState {
    Forest(forest::ForestModel),
    Svm(svm::SvmModel),
    Logistic(logistic::LogisticModel),
    Mlp(mlp::MlpModel),
    Boost(boost::BoostModel),
}

impl ModelState {
    fn matches(&self, id: ClassifierId) -> bool {
        matches!(
            (self, id),
            (ModelState::Forest(_), ClassifierId::Rf)
                | (ModelState::Svm(_), ClassifierId::Svm)
                | (ModelState::Logistic(_), ClassifierId::Lr)
                | (ModelState::Mlp(_), ClassifierId::Mlp)
                | (ModelState::Boost(_), ClassifierId::Xgb)
                | (ModelState::Boost(_), ClassifierId::Lgb)
        )
    }
}

/// A trained classifier plus everything needed to use and persist it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub spec: ClassifierSpec,
    /// Distinct training labels, ascending. Probability column `j` belongs to
    /// `classes[j]`.
    pub classes: Vec<u32>,
    pub n_features: usize,
    /// Wall-clock training time. Not persisted; zero after loading.
    #[serde(skip)]
    pub train_seconds: f64,
    pub state: ModelState,
}

/// Train `spec` on the given features and labels.
pub fn train(spec: &ClassifierSpec, features: ArrayView2<f32>, labels: &[u32]) -> Result<TrainedModel> {
    spec.validate()?;
    let n = features.nrows();
    if n != labels.len() {
        return Err(Error::shape(
            "training inputs",
            format!("{n} label(s)"),
            format!("{} label(s)", labels.len()),
        ));
    }
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    for (i, row) in features.outer_iter().enumerate() {
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: "training features".into(),
                sample: i,
            });
        }
    }
    let mut classes: Vec<u32> = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() < 2 {
        return Err(Error::DegenerateLabels {
            reason: format!("need at least 2 distinct labels, got {}", classes.len()),
        });
    }
    // Compact labels 0..K-1 in ascending class order.
    let compact: Vec<usize> = labels
        .iter()
        .map(|l| classes.binary_search(l).expect("label is in classes"))
        .collect();
    let n_classes = classes.len();

    let started = Instant::now();
    let state = match spec.classifier_id {
        ClassifierId::Rf => ModelState::Forest(forest::train(spec, features, &compact, n_classes)?),
        ClassifierId::Svm => ModelState::Svm(svm::train(spec, features, &compact, n_classes)?),
        ClassifierId::Lr => {
            ModelState::Logistic(logistic::train(spec, features, &compact, n_classes)?)
        }
        ClassifierId::Mlp => ModelState::Mlp(mlp::train(spec, features, &compact, n_classes)?),
        ClassifierId::Xgb => ModelState::Boost(boost::train_xgb(spec, features, &compact, n_classes)?),
        ClassifierId::Lgb => ModelState::Boost(boost::train_lgb(spec, features, &compact, n_classes)?),
    };
    Ok(TrainedModel {
        spec: spec.clone(),
        classes,
        n_features: features.ncols(),
        train_seconds: started.elapsed().as_secs_f64(),
        state,
    })
}

impl TrainedModel {
    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    /// Class probabilities, one row per input row, columns follow `classes`.
    /// Every row sums to 1 within 1e-9.
    pub fn predict_proba(&self, features: ArrayView2<f32>) -> Result<Array2<f64>> {
        if features.ncols() != self.n_features {
            return Err(Error::shape(
                format!("{} inference input", self.spec.classifier_id),
                format!("{} columns", self.n_features),
                format!("{} columns", features.ncols()),
            ));
        }
        for (i, row) in features.outer_iter().enumerate() {
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    context: "inference features".into(),
                    sample: i,
                });
            }
        }
        if features.nrows() == 0 {
            return Ok(Array2::zeros((0, self.n_classes())));
        }
        let probs = match &self.state {
            ModelState::Forest(m) => forest::predict_proba(m, features),
            ModelState::Svm(m) => svm::predict_proba(m, features),
            ModelState::Logistic(m) => logistic::predict_proba(m, features),
            ModelState::Mlp(m) => mlp::predict_proba(m, features),
            ModelState::Boost(m) => boost::predict_proba(m, features),
        };
        debug_assert!(probs
            .outer_iter()
            .all(|row| (row.sum() - 1.0).abs() < 1e-9));
        Ok(probs)
    }

    /// Predicted labels: argmax of `predict_proba`, ties to the lowest label.
    pub fn predict(&self, features: ArrayView2<f32>) -> Result<Vec<u32>> {
        let probs = self.predict_proba(features)?;
        Ok(probs
            .outer_iter()
            .map(|row| {
                let mut best = 0usize;
                for (j, &p) in row.iter().enumerate() {
                    if p > row[best] {
                        best = j;
                    }
                }
                self.classes[best]
            })
            .collect())
    }

    /// The serialized spec document: identity, hyperparameters, shapes.
    /// Hashed by bundles to detect tampering.
    pub fn spec_json(&self) -> Result<Vec<u8>> {
        #[derive(Serialize)]
        struct SpecDoc<'a> {
            classifier_id: ClassifierId,
            hyperparams: &'a BTreeMap<String, f64>,
            seed: u64,
            n_features: usize,
            classes: &'a [u32],
        }
        serde_json::to_vec_pretty(&SpecDoc {
            classifier_id: self.spec.classifier_id,
            hyperparams: &self.spec.hyperparams,
            seed: self.spec.seed,
            n_features: self.n_features,
            classes: &self.classes,
        })
        .map_err(|source| Error::Json {
            context: "model spec".into(),
            source,
        })
    }

    /// Persist to `dir` as `spec.json` + `state.json`. Returns the hex SHA-256
    /// of the spec document.
    pub fn save(&self, dir: &Path) -> Result<String> {
        let spec_bytes = self.spec_json()?;
        atomic_write(&dir.join(SPEC_FILE), &spec_bytes)?;
        let state_bytes = serde_json::to_vec(&self.state).map_err(|source| Error::Json {
            context: "model state".into(),
            source,
        })?;
        atomic_write(&dir.join(STATE_FILE), &state_bytes)?;
        Ok(sha256_hex(&spec_bytes))
    }

    /// Load a model saved by [`TrainedModel::save`]. When `expected_spec_sha`
    /// is given, the stored spec document must hash to it.
    pub fn load(dir: &Path, expected_spec_sha: Option<&str>) -> Result<TrainedModel> {
        #[derive(Deserialize)]
        struct SpecDoc {
            classifier_id: ClassifierId,
            hyperparams: BTreeMap<String, f64>,
            seed: u64,
            n_features: usize,
            classes: Vec<u32>,
        }
        let spec_bytes = read_bytes(&dir.join(SPEC_FILE))?;
        if let Some(expected) = expected_spec_sha {
            let actual = sha256_hex(&spec_bytes);
            if actual != expected {
                return Err(Error::Bundle {
                    path: dir.to_path_buf(),
                    reason: format!("spec hash {actual} does not match manifest {expected}"),
                });
            }
        }
        let doc: SpecDoc = serde_json::from_slice(&spec_bytes).map_err(|source| Error::Json {
            context: format!("model spec in {}", dir.display()),
            source,
        })?;
        let state: ModelState =
            serde_json::from_slice(&read_bytes(&dir.join(STATE_FILE))?).map_err(|source| {
                Error::Json {
                    context: format!("model state in {}", dir.display()),
                    source,
                }
            })?;
        if !state.matches(doc.classifier_id) {
            return Err(Error::Bundle {
                path: dir.to_path_buf(),
                reason: format!(
                    "state kind does not belong to classifier {}",
                    doc.classifier_id
                ),
            });
        }
        let spec = ClassifierSpec {
            classifier_id: doc.classifier_id,
            hyperparams: doc.hyperparams,
            seed: doc.seed,
        };
        spec.validate()?;
        Ok(TrainedModel {
            spec,
            classes: doc.classes,
            n_features: doc.n_features,
            train_seconds: 0.0,
            state,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synth::generate_blobs;

    #[test]
    fn registry_order_is_fixed() {
        let names: Vec<&str> = ClassifierId::ALL.iter().map(|c| c.as_str()).collect();
        assert_eq!(names, vec!["rf", "svm", "lr", "mlp", "xgb", "lgb"]);
        assert_eq!(ClassifierId::Lr.registry_index(), 2);
        for id in ClassifierId::ALL {
            assert_eq!(id.as_str().parse::<ClassifierId>().unwrap(), id);
        }
    }

    #[test]
    fn spec_validation_catches_unknown_and_invalid() {
        let mut spec = ClassifierSpec::new(ClassifierId::Rf, 1);
        spec.hyperparams.insert("n_estimators".into(), 10.0);
        assert!(matches!(
            spec.validate(),
            Err(Error::UnknownHyperparam { .. })
        ));

        let mut spec = ClassifierSpec::new(ClassifierId::Rf, 1);
        spec.hyperparams.insert("n_trees".into(), 0.0);
        assert!(matches!(
            spec.validate(),
            Err(Error::InvalidHyperparam { .. })
        ));

        let mut spec = ClassifierSpec::new(ClassifierId::Svm, 1);
        spec.hyperparams.insert("c".into(), 10.0);
        assert!(spec.validate().is_ok());
        assert_eq!(spec.param("c"), 10.0);
        assert_eq!(spec.param("gamma"), 0.0);
    }

    #[test]
    fn training_input_validation() {
        let (x, y) = generate_blobs(2, 5, 4, 3.0, 1);
        let spec = ClassifierSpec::new(ClassifierId::Lr, 1);
        assert!(matches!(
            train(&spec, x.view(), &y[..5]),
            Err(Error::Shape { .. })
        ));
        assert!(matches!(
            train(&spec, x.view(), &vec![1u32; 10]),
            Err(Error::DegenerateLabels { .. })
        ));
        let mut bad = x.clone();
        bad[[3, 0]] = f32::NAN;
        assert!(matches!(
            train(&spec, bad.view(), &y),
            Err(Error::NonFinite { sample: 3, .. })
        ));
    }

    #[test]
    fn noncontiguous_labels_round_trip() {
        // Labels 2 and 7: probabilities must come back in ascending class
        // order and predictions in original label space.
        let (x, y01) = generate_blobs(2, 15, 6, 4.0, 3);
        let y: Vec<u32> = y01.iter().map(|&c| if c == 0 { 2 } else { 7 }).collect();
        let spec = ClassifierSpec::new(ClassifierId::Lr, 5);
        let model = train(&spec, x.view(), &y).unwrap();
        assert_eq!(model.classes, vec![2, 7]);
        let preds = model.predict(x.view()).unwrap();
        assert!(preds.iter().all(|p| *p == 2 || *p == 7));
        let correct = preds.iter().zip(&y).filter(|(a, b)| a == b).count();
        assert!(correct >= 28, "only {correct}/30 correct");
    }

    #[test]
    fn empty_prediction_batch_yields_empty_output() {
        let (x, y) = generate_blobs(2, 10, 4, 4.0, 2);
        let spec = ClassifierSpec::new(ClassifierId::Lr, 5);
        let model = train(&spec, x.view(), &y).unwrap();
        let empty = Array2::<f32>::zeros((0, 4));
        assert_eq!(model.predict(empty.view()).unwrap(), Vec::<u32>::new());
        assert_eq!(model.predict_proba(empty.view()).unwrap().shape(), &[0, 2]);
    }

    #[test]
    fn save_load_round_trip_with_hash_check() {
        let (x, y) = generate_blobs(2, 10, 4, 4.0, 2);
        let spec = ClassifierSpec::new(ClassifierId::Lr, 5);
        let model = train(&spec, x.view(), &y).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let sha = model.save(dir.path()).unwrap();

        let loaded = TrainedModel::load(dir.path(), Some(&sha)).unwrap();
        assert_eq!(loaded.classes, model.classes);
        assert_eq!(loaded.state, model.state);
        assert_eq!(
            loaded.predict_proba(x.view()).unwrap(),
            model.predict_proba(x.view()).unwrap()
        );

        let err = TrainedModel::load(dir.path(), Some("0".repeat(64).as_str())).unwrap_err();
        assert!(matches!(err, Error::Bundle { .. }));
    }
}
