//! Deep feature extraction: backbones, the extraction driver, and the
//! feature cache.

pub mod backbone;
pub mod cache;
pub mod extract;
pub mod mock;
#[cfg(feature = "onnx")]
pub mod onnx;

pub use backbone::{Backbone, BackboneId, BackboneSpec};
pub use cache::{load_features, store_features, CacheKey};
pub use extract::{extract_features, FeatureMatrix};
pub use mock::{MockBackbone, MOCK_FEATURE_DIM};
