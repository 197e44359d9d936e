//! Stratified train/test splitting and k-fold plans.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::manifest::DatasetManifest;
use crate::error::{Error, Result};
use crate::util::derive_seed;

/// Round half away from zero. `round()` on f64 already does this; named for
/// clarity at the call sites that allocate per-class training counts.
fn round_half_away(x: f64) -> f64 {
    x.round()
}

fn indices_by_class(labels: &[u32]) -> BTreeMap<u32, Vec<usize>> {
    let mut by_class: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (i, &label) in labels.iter().enumerate() {
        by_class.entry(label).or_default().push(i);
    }
    by_class
}

/// Stratified split into (train, test) index lists, both sorted ascending.
///
/// Each class contributes `round(fraction * count)` training samples, clamped
/// so both sides keep at least one sample per class. Which samples go where is
/// decided by a per-class shuffle seeded from `seed`, so the split is
/// reproducible and independent of other random consumers.
pub fn stratified_split(
    manifest: &DatasetManifest,
    fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidFraction { value: fraction });
    }
    let labels = manifest.labels();
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (label, mut indices) in indices_by_class(&labels) {
        let count = indices.len();
        if count < 2 {
            let class = manifest
                .label_map
                .name_of(label)
                .unwrap_or("<unknown>")
                .to_string();
            return Err(Error::TooFewSamples {
                class,
                count,
                required: 2,
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &format!("split/{label}")));
        indices.shuffle(&mut rng);
        let n_train = (round_half_away(fraction * count as f64) as usize).clamp(1, count - 1);
        train.extend_from_slice(&indices[..n_train]);
        test.extend_from_slice(&indices[n_train..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// A stratified k-fold partition of a dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub seed: u64,
    /// `folds[f]` holds the held-out sample indices of fold `f`, sorted.
    pub folds: Vec<Vec<usize>>,
}

impl FoldPlan {
    /// Training indices for fold `f`: everything outside `folds[f]`, sorted.
    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        let mut held = vec![false; self.len_total()];
        for &i in &self.folds[fold] {
            held[i] = true;
        }
        (0..held.len()).filter(|&i| !held[i]).collect()
    }

    pub fn test_indices(&self, fold: usize) -> &[usize] {
        &self.folds[fold]
    }

    fn len_total(&self) -> usize {
        self.folds.iter().map(|f| f.len()).sum::<usize>()
    }
}

/// Build a stratified k-fold plan.
///
/// Every class is shuffled with its own seeded stream and dealt round-robin
/// across folds, so fold class counts differ by at most one per class and the
/// folds partition the dataset exactly.
pub fn make_folds(manifest: &DatasetManifest, k: usize, seed: u64) -> Result<FoldPlan> {
    let labels = manifest.labels();
    // Pre-check with class names; the label-keyed check below would only
    // report numeric ids.
    if k >= 2 {
        for (label, indices) in indices_by_class(&labels) {
            if indices.len() < k {
                let class = manifest
                    .label_map
                    .name_of(label)
                    .unwrap_or("<unknown>")
                    .to_string();
                return Err(Error::Fold {
                    reason: format!(
                        "class {class:?} has {} samples, fewer than k={k}",
                        indices.len()
                    ),
                });
            }
        }
    }
    make_label_folds(&labels, k, seed)
}

/// Build a stratified k-fold plan over bare labels.
///
/// Fold entries are positions into `labels`, so a caller folding a subset of
/// a dataset maps positions back through its own index list. Error messages
/// name numeric label ids; [`make_folds`] adds class names on top.
pub fn make_label_folds(labels: &[u32], k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::Fold {
            reason: format!("k must be at least 2, got {k}"),
        });
    }
    let by_class = indices_by_class(labels);
    for (label, indices) in &by_class {
        if indices.len() < k {
            return Err(Error::Fold {
                reason: format!(
                    "label {label} has {} samples, fewer than k={k}",
                    indices.len()
                ),
            });
        }
    }
    let mut folds = vec![Vec::new(); k];
    for (label, mut indices) in by_class {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &format!("folds/{label}")));
        indices.shuffle(&mut rng);
        for (j, index) in indices.into_iter().enumerate() {
            folds[j % k].push(index);
        }
    }
    for fold in &mut folds {
        fold.sort_unstable();
    }
    Ok(FoldPlan { k, seed, folds })
}
