//! Error taxonomy for the whole pipeline.
//!
//! Every fallible operation in this crate returns [`Error`]. Variants carry
//! enough payload (paths, class names, dimensions) to make the failure
//! actionable without a debugger. [`Error::class`] buckets variants into the
//! coarse categories the CLI maps to exit codes.

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("class directory for {class:?} missing at {path}")]
    MissingClassDir { class: String, path: PathBuf },

    #[error("class {class:?} has no readable images under {path}")]
    EmptyClass { class: String, path: PathBuf },

    #[error("failed to decode image {path}: {source}")]
    Decode {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("failed to encode image {path}: {source}")]
    Encode {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("image {path} has {channels} channels, expected 3")]
    Channel { path: PathBuf, channels: u8 },

    #[error("manifest at {path} is inconsistent: {reason}")]
    Manifest { path: PathBuf, reason: String },

    #[error("class {class:?} has {count} samples, need at least {required}")]
    TooFewSamples {
        class: String,
        count: usize,
        required: usize,
    },

    #[error("train fraction must lie strictly between 0 and 1, got {value}")]
    InvalidFraction { value: f64 },

    #[error("cannot build folds: {reason}")]
    Fold { reason: String },

    #[error("failed to load backbone {backbone:?}: {reason}")]
    BackboneLoad { backbone: String, reason: String },

    #[error("shape mismatch in {context}: expected {expected}, got {actual}")]
    Shape {
        context: String,
        expected: String,
        actual: String,
    },

    #[error("non-finite value produced by {context} for sample {sample}")]
    NonFinite { context: String, sample: usize },

    #[error("no cached features for dataset {dataset_id} / backbone {backbone} / preprocess {preprocess_hash}")]
    CacheMiss {
        dataset_id: String,
        backbone: String,
        preprocess_hash: String,
    },

    #[error("cached features at {path} do not match the requested key: {reason}")]
    StaleCache { path: PathBuf, reason: String },

    #[error("labels are degenerate: {reason}")]
    DegenerateLabels { reason: String },

    #[error("unknown hyperparameter {name:?} for classifier {classifier}")]
    UnknownHyperparam { classifier: String, name: String },

    #[error("hyperparameter {name:?} for classifier {classifier} has invalid value {value}: {reason}")]
    InvalidHyperparam {
        classifier: String,
        name: String,
        value: f64,
        reason: String,
    },

    #[error("leaderboard is missing cells: {missing}")]
    IncompleteGrid { missing: String },

    #[error("selection failed: {reason}")]
    Selection { reason: String },

    #[error("ensemble has no members")]
    EmptyEnsemble,

    #[error("invalid ensemble weights: {reason}")]
    InvalidWeights { reason: String },

    #[error("label {label} out of range for {classes} classes")]
    Label { label: u32, classes: usize },

    #[error("metric input is empty")]
    EmptyInput,

    #[error("fold {fold} failed: {source}")]
    InFold {
        fold: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("stage {stage} failed: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },

    #[error("model bundle at {path} is invalid: {reason}")]
    Bundle { path: PathBuf, reason: String },

    #[error("serialization of {context} failed: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },
}

/// Coarse failure category, used by the CLI for exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Bad configuration or arguments.
    Config,
    /// Problems with the input dataset or derived artifacts.
    Data,
    /// Model loading, training, or inference failures.
    Model,
    /// Bugs and unexpected internal states.
    Internal,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        use Error::*;
        match self {
            Config(_)
            | InvalidFraction { .. }
            | Fold { .. }
            | UnknownHyperparam { .. }
            | InvalidHyperparam { .. }
            | Selection { .. }
            | InvalidWeights { .. } => ErrorClass::Config,
            Io { .. }
            | MissingClassDir { .. }
            | EmptyClass { .. }
            | Decode { .. }
            | Encode { .. }
            | Channel { .. }
            | Manifest { .. }
            | TooFewSamples { .. }
            | CacheMiss { .. }
            | StaleCache { .. }
            | DegenerateLabels { .. }
            | Label { .. }
            | EmptyInput => ErrorClass::Data,
            BackboneLoad { .. } | NonFinite { .. } | Bundle { .. } => ErrorClass::Model,
            Shape { .. } | IncompleteGrid { .. } | EmptyEnsemble | Json { .. } => {
                ErrorClass::Internal
            }
            InFold { source, .. } | Stage { source, .. } => source.class(),
        }
    }

    /// Wraps an error with the name of the pipeline stage it occurred in.
    pub fn in_stage(stage: impl Into<String>, source: Error) -> Self {
        Error::Stage {
            stage: stage.into(),
            source: Box::new(source),
        }
    }

    /// Helper for i/o failures that should carry the offending path.
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn shape(context: impl Into<String>, expected: impl Into<String>, actual: impl Into<String>) -> Self {
        Error::Shape {
            context: context.into(),
            expected: expected.into(),
            actual: actual.into(),
        }
    }
}
