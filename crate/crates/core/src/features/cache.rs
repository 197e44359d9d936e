//! On-disk feature cache.
//!
//! Layout: `<cache_dir>/<dataset_id>/<backbone_id>/<preprocess_hash>/` holding
//! `features.bin` (row-major f32, little endian) and `meta.json`. The key
//! triple makes stale reuse impossible: change the data, the backbone, or the
//! preprocessing recipe and the path changes with it.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::util::{atomic_write, read_bytes};

use super::backbone::BackboneId;
use super::extract::FeatureMatrix;

pub const FEATURES_FILE: &str = "features.bin";
pub const META_FILE: &str = "meta.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheKey {
    pub dataset_id: String,
    pub backbone_id: BackboneId,
    pub preprocess_hash: String,
}

impl CacheKey {
    pub fn dir(&self, cache_dir: &Path) -> PathBuf {
        cache_dir
            .join(&self.dataset_id)
            .join(self.backbone_id.as_str())
            .join(&self.preprocess_hash)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct CacheMeta {
    n_samples: usize,
    feature_dim: usize,
    dtype: String,
    backbone_id: BackboneId,
    dataset_id: String,
    preprocess_hash: String,
    labels: Vec<u32>,
    /// Unix seconds at write time. Informational only; never compared.
    created_at: u64,
}

/// Persist a feature matrix. Returns the key it was stored under.
pub fn store_features(matrix: &FeatureMatrix, cache_dir: &Path) -> Result<CacheKey> {
    let key = CacheKey {
        dataset_id: matrix.dataset_id.clone(),
        backbone_id: matrix.backbone_id,
        preprocess_hash: matrix.preprocess_hash.clone(),
    };
    let dir = key.dir(cache_dir);

    let mut bytes = Vec::with_capacity(matrix.values.len() * 4);
    for v in matrix.values.iter() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    atomic_write(&dir.join(FEATURES_FILE), &bytes)?;

    let meta = CacheMeta {
        n_samples: matrix.n_samples(),
        feature_dim: matrix.feature_dim(),
        dtype: "f32le".into(),
        backbone_id: matrix.backbone_id,
        dataset_id: matrix.dataset_id.clone(),
        preprocess_hash: matrix.preprocess_hash.clone(),
        labels: matrix.labels.clone(),
        created_at: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
    };
    let json = serde_json::to_vec_pretty(&meta).map_err(|source| Error::Json {
        context: "cache metadata".into(),
        source,
    })?;
    atomic_write(&dir.join(META_FILE), &json)?;
    Ok(key)
}

/// Load the features stored under `key`, verifying metadata consistency.
pub fn load_features(key: &CacheKey, cache_dir: &Path) -> Result<FeatureMatrix> {
    let dir = key.dir(cache_dir);
    let meta_path = dir.join(META_FILE);
    let bin_path = dir.join(FEATURES_FILE);
    if !meta_path.is_file() || !bin_path.is_file() {
        return Err(Error::CacheMiss {
            dataset_id: key.dataset_id.clone(),
            backbone: key.backbone_id.to_string(),
            preprocess_hash: key.preprocess_hash.clone(),
        });
    }
    let meta: CacheMeta = serde_json::from_slice(&read_bytes(&meta_path)?).map_err(|e| {
        Error::StaleCache {
            path: meta_path.clone(),
            reason: format!("metadata unreadable: {e}"),
        }
    })?;
    if meta.dataset_id != key.dataset_id
        || meta.backbone_id != key.backbone_id
        || meta.preprocess_hash != key.preprocess_hash
    {
        return Err(Error::StaleCache {
            path: meta_path,
            reason: "metadata does not match the requested key".into(),
        });
    }
    if meta.dtype != "f32le" {
        return Err(Error::StaleCache {
            path: meta_path,
            reason: format!("unsupported dtype {:?}", meta.dtype),
        });
    }
    if meta.labels.len() != meta.n_samples {
        return Err(Error::StaleCache {
            path: meta_path,
            reason: format!(
                "{} labels for {} samples",
                meta.labels.len(),
                meta.n_samples
            ),
        });
    }
    let bytes = read_bytes(&bin_path)?;
    let expected = meta.n_samples * meta.feature_dim * 4;
    if bytes.len() != expected {
        return Err(Error::StaleCache {
            path: bin_path,
            reason: format!("expected {expected} bytes, found {}", bytes.len()),
        });
    }
    let mut values = Array2::<f32>::zeros((meta.n_samples, meta.feature_dim));
    for (i, chunk) in bytes.chunks_exact(4).enumerate() {
        values[[i / meta.feature_dim, i % meta.feature_dim]] =
            f32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]);
    }
    Ok(FeatureMatrix {
        values,
        labels: meta.labels,
        backbone_id: meta.backbone_id,
        dataset_id: meta.dataset_id,
        preprocess_hash: meta.preprocess_hash,
    })
}
