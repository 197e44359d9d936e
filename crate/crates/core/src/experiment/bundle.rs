//! Deployment bundles: a saved ensemble plus everything needed to run it on
//! a raw image.
//!
//! Layout under the bundle directory:
//! `bundle.json` (backbone spec, preprocessing, label map, voting mode,
//! weights, member list with spec hashes) and `members/<classifier_id>/`
//! holding each member's `spec.json` + `state.json`. Loading re-hashes every
//! member spec against the manifest, so silent tampering or partial copies
//! fail loudly instead of predicting garbage.

use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::data::{preprocess_image, LabelMap, PreprocessConfig};
use crate::ensemble::{EnsembleModel, VotingMode};
use crate::error::{Error, Result};
use crate::features::BackboneSpec;
use crate::zoo::{ClassifierId, TrainedModel};

pub const BUNDLE_FILE: &str = "bundle.json";
pub const MEMBERS_DIR: &str = "members";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleMember {
    pub classifier_id: ClassifierId,
    /// Hex SHA-256 of the member's spec.json as saved.
    pub spec_sha256: String,
}

/// The bundle manifest persisted as `bundle.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleManifest {
    pub backbone: BackboneSpec,
    pub preprocess: PreprocessConfig,
    pub label_map: LabelMap,
    pub mode: VotingMode,
    pub weights: Vec<f64>,
    pub members: Vec<BundleMember>,
}

/// A bundle read back from disk, verified and ready to predict.
#[derive(Debug)]
pub struct LoadedBundle {
    pub manifest: BundleManifest,
    pub ensemble: EnsembleModel,
}

/// Result of classifying one image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SinglePrediction {
    pub class_name: String,
    pub class_id: u32,
    /// One entry per label-map class, in id order. Sums to 1 in soft mode;
    /// carries the vote shares in hard mode.
    pub probabilities: Vec<f64>,
    pub elapsed_seconds: f64,
}

fn bundle_error(dir: &Path, reason: impl Into<String>) -> Error {
    Error::Bundle {
        path: dir.to_path_buf(),
        reason: reason.into(),
    }
}

/// Persist a trained ensemble with its full inference context.
pub fn save_bundle(
    dir: &Path,
    backbone: &BackboneSpec,
    preprocess: &PreprocessConfig,
    label_map: &LabelMap,
    ensemble: &EnsembleModel,
) -> Result<()> {
    let members_dir = dir.join(MEMBERS_DIR);
    std::fs::create_dir_all(&members_dir).map_err(|e| Error::io(members_dir.clone(), e))?;
    let mut members = Vec::with_capacity(ensemble.members.len());
    for member in &ensemble.members {
        let member_dir = members_dir.join(member.spec.classifier_id.as_str());
        std::fs::create_dir_all(&member_dir).map_err(|e| Error::io(member_dir.clone(), e))?;
        let spec_sha256 = member.save(&member_dir)?;
        members.push(BundleMember {
            classifier_id: member.spec.classifier_id,
            spec_sha256,
        });
    }
    let manifest = BundleManifest {
        backbone: backbone.clone(),
        preprocess: preprocess.clone(),
        label_map: label_map.clone(),
        mode: ensemble.mode,
        weights: ensemble.weights.clone(),
        members,
    };
    super::runner::write_json(&dir.join(BUNDLE_FILE), &manifest, "bundle manifest")
}

/// Load and verify a bundle saved by [`save_bundle`].
pub fn load_bundle(dir: &Path) -> Result<LoadedBundle> {
    let manifest: BundleManifest = super::runner::read_json(&dir.join(BUNDLE_FILE), "bundle manifest")
        .map_err(|e| match e {
            // A malformed manifest is a broken bundle, not an internal bug.
            Error::Json { context, source } => bundle_error(dir, format!("{context}: {source}")),
            other => other,
        })?;
    if manifest.members.is_empty() {
        return Err(bundle_error(dir, "bundle lists no members"));
    }
    let mut members = Vec::with_capacity(manifest.members.len());
    for entry in &manifest.members {
        let member_dir = dir.join(MEMBERS_DIR).join(entry.classifier_id.as_str());
        let model = TrainedModel::load(&member_dir, Some(&entry.spec_sha256))?;
        if model.spec.classifier_id != entry.classifier_id {
            return Err(bundle_error(
                dir,
                format!(
                    "member directory {} holds a {} model",
                    entry.classifier_id, model.spec.classifier_id
                ),
            ));
        }
        members.push(model);
    }
    let ensemble = EnsembleModel::new(members, Some(manifest.weights.clone()), manifest.mode)?;
    let n_classes = manifest.label_map.n_classes();
    for &class in ensemble.classes() {
        if manifest.label_map.name_of(class).is_none() {
            return Err(bundle_error(
                dir,
                format!("members were trained on class {class}, which the label map ({n_classes} classes) does not name"),
            ));
        }
    }
    Ok(LoadedBundle { manifest, ensemble })
}

impl LoadedBundle {
    /// Classify one image file: preprocess, extract, vote. Elapsed time
    /// covers the full path including the backbone forward pass.
    pub fn predict_image(&self, image_path: &Path) -> Result<SinglePrediction> {
        let started = Instant::now();
        let backbone = self.manifest.backbone.load()?;
        let pixels = preprocess_image(image_path, &self.manifest.preprocess)?;
        let features = backbone.extract_batch(std::slice::from_ref(&pixels))?;
        let probs = self.ensemble.predict_proba(features.view())?;
        let labels = self.ensemble.predict(features.view())?;
        let class_id = labels[0];
        let class_name = self
            .manifest
            .label_map
            .name_of(class_id)
            .expect("classes checked against the label map at load")
            .to_string();

        // Member probability columns follow the trained class list; spread
        // them over the label map's id range.
        let n_classes = self.manifest.label_map.n_classes();
        let mut probabilities = vec![0.0; n_classes];
        for (j, &class) in self.ensemble.classes().iter().enumerate() {
            probabilities[class as usize] = probs[[0, j]];
        }
        Ok(SinglePrediction {
            class_name,
            class_id,
            probabilities,
            elapsed_seconds: started.elapsed().as_secs_f64(),
        })
    }
}

/// One-call form: load the bundle at `bundle_dir` and classify `image_path`.
pub fn predict_single(bundle_dir: &Path, image_path: &Path) -> Result<SinglePrediction> {
    load_bundle(bundle_dir)?.predict_image(image_path)
}
