//! Dataset discovery: scanning a class-per-directory tree into a manifest.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::label_map::LabelMap;
use crate::error::{Error, Result};
use crate::util::atomic_write;

/// File extensions considered images, compared case-insensitively.
pub const IMAGE_EXTENSIONS: &[&str] = &["jpeg", "jpg", "png"];

/// One discovered sample. `path` is relative to the dataset root and uses `/`
/// separators regardless of platform so manifests are portable. `bytes` is
/// the file size, folded into the dataset id so replacing a file's content in
/// place almost always changes the id (a same-length replacement would not).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub label_id: u32,
    #[serde(default)]
    pub bytes: u64,
}

/// A scanned dataset: the sample list, per-class counts, and a content id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    /// Root the scan ran against. Provenance only; not part of `dataset_id`.
    pub root: PathBuf,
    pub label_map: LabelMap,
    /// Sorted lexicographically by relative path.
    pub samples: Vec<ManifestEntry>,
    pub class_counts: BTreeMap<String, usize>,
    /// SHA-256 over the sorted `(path, label_id, bytes)` triples. Stable
    /// across scan order, machines, and dataset location; changes when files
    /// are added, removed, renamed, relabeled, or replaced with different
    /// content. Re-scan after editing the dataset in place.
    pub dataset_id: String,
}

/// A file the scanner skipped, with the reason.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SkipRecord {
    pub path: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SkipReport {
    pub records: Vec<SkipRecord>,
}

impl SkipReport {
    /// Write one JSON object per line.
    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        for record in &self.records {
            let line = serde_json::to_string(record).map_err(|source| Error::Json {
                context: "skip record".into(),
                source,
            })?;
            out.push_str(&line);
            out.push('\n');
        }
        atomic_write(path, out.as_bytes())
    }
}

/// Compute the dataset id from sorted `(path, label_id, bytes)` triples.
fn dataset_id(samples: &[ManifestEntry]) -> String {
    let mut hasher = Sha256::new();
    for entry in samples {
        hasher.update(entry.path.as_bytes());
        hasher.update([0u8]);
        hasher.update(entry.label_id.to_le_bytes());
        hasher.update(entry.bytes.to_le_bytes());
        hasher.update([b'\n']);
    }
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for b in digest.iter() {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

fn has_image_extension(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .map(|e| {
            let lower = e.to_ascii_lowercase();
            IMAGE_EXTENSIONS.contains(&lower.as_str())
        })
        .unwrap_or(false)
}

/// Scan `root`, expecting one subdirectory per class in `label_map`.
///
/// Files whose headers cannot be read as images are skipped and reported, so
/// the manifest only lists samples the feature extractor will accept. The
/// sample order is lexicographic by relative path, independent of directory
/// enumeration order.
pub fn scan_dataset(root: &Path, label_map: &LabelMap) -> Result<(DatasetManifest, SkipReport)> {
    let mut samples = Vec::new();
    let mut skips = SkipReport::default();
    let mut class_counts = BTreeMap::new();

    for entry in label_map.entries() {
        let class_dir = root.join(&entry.name);
        if !class_dir.is_dir() {
            return Err(Error::MissingClassDir {
                class: entry.name.clone(),
                path: class_dir,
            });
        }
        let mut kept = 0usize;
        let read = fs::read_dir(&class_dir).map_err(|e| Error::io(&class_dir, e))?;
        for file in read {
            let file = file.map_err(|e| Error::io(&class_dir, e))?;
            let path = file.path();
            if !path.is_file() || !has_image_extension(&path) {
                continue;
            }
            let rel = format!(
                "{}/{}",
                entry.name,
                path.file_name().unwrap_or_default().to_string_lossy()
            );
            // Cheap header probe: rejects corrupt or non-image files now so
            // extraction never trips over them later.
            match image::image_dimensions(&path) {
                Ok(_) => {
                    let bytes = file.metadata().map_err(|e| Error::io(&path, e))?.len();
                    samples.push(ManifestEntry {
                        path: rel,
                        label_id: entry.id,
                        bytes,
                    });
                    kept += 1;
                }
                Err(err) => {
                    log::warn!("skipping unreadable image {}: {err}", path.display());
                    skips.records.push(SkipRecord {
                        path: rel,
                        reason: err.to_string(),
                    });
                }
            }
        }
        if kept == 0 {
            return Err(Error::EmptyClass {
                class: entry.name.clone(),
                path: class_dir,
            });
        }
        class_counts.insert(entry.name.clone(), kept);
    }

    samples.sort_by(|a, b| a.path.cmp(&b.path));
    skips.records.sort_by(|a, b| a.path.cmp(&b.path));
    let id = dataset_id(&samples);
    Ok((
        DatasetManifest {
            root: root.to_path_buf(),
            label_map: label_map.clone(),
            samples,
            class_counts,
            dataset_id: id,
        },
        skips,
    ))
}

impl DatasetManifest {
    /// Build directly from entries, e.g. for synthetic evaluation data.
    /// Entries are sorted and the id computed the same way as in a scan.
    pub fn from_entries(
        root: PathBuf,
        label_map: LabelMap,
        mut samples: Vec<ManifestEntry>,
    ) -> Result<Self> {
        samples.sort_by(|a, b| a.path.cmp(&b.path));
        let mut class_counts = BTreeMap::new();
        for s in &samples {
            let name = label_map
                .name_of(s.label_id)
                .ok_or(Error::Label {
                    label: s.label_id,
                    classes: label_map.n_classes(),
                })?
                .to_string();
            *class_counts.entry(name).or_insert(0) += 1;
        }
        let id = dataset_id(&samples);
        Ok(DatasetManifest {
            root,
            label_map,
            samples,
            class_counts,
            dataset_id: id,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Label ids in sample order.
    pub fn labels(&self) -> Vec<u32> {
        self.samples.iter().map(|s| s.label_id).collect()
    }

    /// Absolute path of sample `i`.
    pub fn sample_path(&self, i: usize) -> PathBuf {
        self.root.join(&self.samples[i].path)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_vec_pretty(self).map_err(|source| Error::Json {
            context: "dataset manifest".into(),
            source,
        })?;
        atomic_write(path, &json)
    }

    /// Load a manifest and verify its dataset id still matches the entries.
    pub fn load(path: &Path) -> Result<Self> {
        let bytes = crate::util::read_bytes(path)?;
        let manifest: DatasetManifest =
            serde_json::from_slice(&bytes).map_err(|source| Error::Json {
                context: format!("dataset manifest at {}", path.display()),
                source,
            })?;
        let recomputed = dataset_id(&manifest.samples);
        if recomputed != manifest.dataset_id {
            return Err(Error::Manifest {
                path: path.to_path_buf(),
                reason: format!(
                    "stored dataset_id {} does not match recomputed {}",
                    manifest.dataset_id, recomputed
                ),
            });
        }
        Ok(manifest)
    }
}
