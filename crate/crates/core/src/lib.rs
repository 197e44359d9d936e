//! Histopathology image classification pipeline.
//!
//! The crate wires together four stages: deep feature extraction from
//! truncated CNN backbones (or a fast deterministic mock), a zoo of six
//! classical classifiers trained on those features, accuracy-ranked selection
//! of the top performers, and hard/soft voting ensembles over the selection.
//! Everything downstream of the image bytes is reproducible from a single
//! seed.

pub mod data;
pub mod ensemble;
pub mod error;
pub mod experiment;
pub mod features;
pub mod metrics;
pub mod util;
pub mod zoo;

pub use error::{Error, ErrorClass, Result};
