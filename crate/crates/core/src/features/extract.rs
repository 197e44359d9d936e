//! Driving a backbone over a dataset.

use ndarray::Array2;
use rayon::prelude::*;

use crate::data::{preprocess_image, DatasetManifest, Pixels, PreprocessConfig};
use crate::error::{Error, Result};

use super::backbone::{Backbone, BackboneId};

/// Extracted features for a dataset, aligned with its manifest order.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    /// One row per sample, `feature_dim` columns.
    pub values: Array2<f32>,
    pub labels: Vec<u32>,
    pub backbone_id: BackboneId,
    pub dataset_id: String,
    pub preprocess_hash: String,
}

impl FeatureMatrix {
    pub fn n_samples(&self) -> usize {
        self.values.nrows()
    }

    pub fn feature_dim(&self) -> usize {
        self.values.ncols()
    }
}

/// Decode, preprocess, and extract every sample in the manifest.
///
/// Decoding runs in parallel per batch; results are stitched back in manifest
/// order so the output is independent of thread scheduling. Files that fail to
/// decode here are hard errors: the scanner already filtered unreadable files,
/// so a failure means the dataset changed after scanning.
pub fn extract_features(
    backbone: &dyn Backbone,
    manifest: &DatasetManifest,
    preprocess: &PreprocessConfig,
    batch_size: usize,
) -> Result<FeatureMatrix> {
    let batch_size = batch_size.max(1);
    let n = manifest.len();
    let dim = backbone.feature_dim();
    let mut values = Array2::<f32>::zeros((n, dim));

    let indices: Vec<usize> = (0..n).collect();
    for chunk in indices.chunks(batch_size) {
        let pixels: Vec<Pixels> = chunk
            .par_iter()
            .map(|&i| preprocess_image(&manifest.sample_path(i), preprocess))
            .collect::<Result<Vec<_>>>()?;
        let batch = backbone.extract_batch(&pixels)?;
        if batch.shape() != [chunk.len(), dim] {
            return Err(Error::shape(
                "backbone batch output",
                format!("{}x{dim}", chunk.len()),
                format!("{:?}", batch.shape()),
            ));
        }
        for (row_in_batch, &i) in chunk.iter().enumerate() {
            for j in 0..dim {
                let v = batch[[row_in_batch, j]];
                if !v.is_finite() {
                    return Err(Error::NonFinite {
                        context: format!("{} features", backbone.id()),
                        sample: i,
                    });
                }
                values[[i, j]] = v;
            }
        }
    }

    Ok(FeatureMatrix {
        values,
        labels: manifest.labels(),
        backbone_id: backbone.id(),
        dataset_id: manifest.dataset_id.clone(),
        preprocess_hash: preprocess.hash(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synth::{generate_image_tree, ImageTreeOptions};
    use crate::data::{scan_dataset, LabelMap};
    use crate::features::backbone::BackboneSpec;

    fn demo() -> (tempfile::TempDir, DatasetManifest) {
        let dir = tempfile::tempdir().unwrap();
        let map = LabelMap::from_names(vec!["a", "b"]).unwrap();
        let options = ImageTreeOptions {
            per_class: 4,
            image_size: 32,
            noise: 8,
            seed: 11,
        };
        generate_image_tree(dir.path(), &map, &options).unwrap();
        let (manifest, _) = scan_dataset(dir.path(), &map).unwrap();
        (dir, manifest)
    }

    #[test]
    fn extraction_matches_manifest_order_and_is_deterministic() {
        let (_dir, manifest) = demo();
        let backbone = BackboneSpec::mock().load().unwrap();
        let cfg = PreprocessConfig::default();
        let a = extract_features(backbone.as_ref(), &manifest, &cfg, 3).unwrap();
        let b = extract_features(backbone.as_ref(), &manifest, &cfg, 8).unwrap();
        // Batch size must not influence values.
        assert_eq!(a.values, b.values);
        assert_eq!(a.n_samples(), 8);
        assert_eq!(a.feature_dim(), backbone.feature_dim());
        assert_eq!(a.labels, manifest.labels());
        assert_eq!(a.dataset_id, manifest.dataset_id);
    }

    #[test]
    fn file_removed_after_scan_is_a_hard_error() {
        let (dir, manifest) = demo();
        std::fs::remove_file(manifest.sample_path(0)).unwrap();
        let backbone = BackboneSpec::mock().load().unwrap();
        let err =
            extract_features(backbone.as_ref(), &manifest, &PreprocessConfig::default(), 4)
                .unwrap_err();
        assert!(matches!(err, Error::Decode { .. }), "{err}");
        drop(dir);
    }
}
