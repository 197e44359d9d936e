//! Backbone identities and loading.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::data::Pixels;
use crate::error::{Error, Result};

/// The supported feature extractors.
///
/// The five CNN ids refer to truncated pretrained graphs (everything up to and
/// including the last pooling layer, classifier head removed) supplied as ONNX
/// files. `Mock` is a fast deterministic stand-in used by tests and demos.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackboneId {
    Vgg16,
    Vgg19,
    Mobilenet,
    Densenet169,
    Densenet201,
    Mock,
}

impl BackboneId {
    pub const ALL: [BackboneId; 6] = [
        BackboneId::Vgg16,
        BackboneId::Vgg19,
        BackboneId::Mobilenet,
        BackboneId::Densenet169,
        BackboneId::Densenet201,
        BackboneId::Mock,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            BackboneId::Vgg16 => "vgg16",
            BackboneId::Vgg19 => "vgg19",
            BackboneId::Mobilenet => "mobilenet",
            BackboneId::Densenet169 => "densenet169",
            BackboneId::Densenet201 => "densenet201",
            BackboneId::Mock => "mock",
        }
    }
}

impl fmt::Display for BackboneId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BackboneId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "vgg16" => Ok(BackboneId::Vgg16),
            "vgg19" => Ok(BackboneId::Vgg19),
            "mobilenet" => Ok(BackboneId::Mobilenet),
            "densenet169" => Ok(BackboneId::Densenet169),
            "densenet201" => Ok(BackboneId::Densenet201),
            "mock" => Ok(BackboneId::Mock),
            other => Err(Error::Config(format!("unknown backbone id {other:?}"))),
        }
    }
}

/// How to instantiate a backbone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackboneSpec {
    pub backbone_id: BackboneId,
    /// ONNX graph location. Required for CNN backbones, forbidden for `mock`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_path: Option<PathBuf>,
}

impl BackboneSpec {
    pub fn mock() -> Self {
        BackboneSpec {
            backbone_id: BackboneId::Mock,
            model_path: None,
        }
    }

    pub fn onnx(id: BackboneId, model_path: impl Into<PathBuf>) -> Self {
        BackboneSpec {
            backbone_id: id,
            model_path: Some(model_path.into()),
        }
    }

    /// Instantiate the extractor this spec describes.
    pub fn load(&self) -> Result<Box<dyn Backbone>> {
        match (self.backbone_id, &self.model_path) {
            (BackboneId::Mock, None) => Ok(Box::new(super::mock::MockBackbone::new())),
            (BackboneId::Mock, Some(path)) => Err(Error::BackboneLoad {
                backbone: "mock".into(),
                reason: format!(
                    "mock backbone takes no model file, but {} was given",
                    path.display()
                ),
            }),
            (id, None) => Err(Error::BackboneLoad {
                backbone: id.to_string(),
                reason: "model_path is required for CNN backbones".into(),
            }),
            #[cfg(feature = "onnx")]
            (id, Some(path)) => Ok(Box::new(super::onnx::OnnxBackbone::load(id, path)?)),
            #[cfg(not(feature = "onnx"))]
            (id, Some(_)) => Err(Error::BackboneLoad {
                backbone: id.to_string(),
                reason: "built without the `onnx` feature; only the mock backbone is available"
                    .into(),
            }),
        }
    }
}

/// A loaded feature extractor.
///
/// Implementations must be deterministic and batch-invariant: the features of
/// a sample depend only on its pixels, never on what else is in the batch.
pub trait Backbone: Send + Sync {
    fn id(&self) -> BackboneId;

    /// Width of the flattened feature vector.
    fn feature_dim(&self) -> usize;

    /// Extract features for a batch, one row per sample, in input order.
    fn extract_batch(&self, batch: &[Pixels]) -> Result<Array2<f32>>;
}
