//! Accuracy grid over (classifier, backbone) pairs.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::BackboneId;
use crate::zoo::ClassifierId;

/// Mean cross-validated accuracy per (classifier, backbone) cell, as a
/// fraction in [0, 1]. The grid must be complete before ranking: a missing
/// cell would silently bias any average taken across backbones.
///
/// Cells nest classifier over backbone so the whole grid serializes as plain
/// JSON objects keyed by the lowercase id strings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Leaderboard {
    /// Column order, as configured for the experiment.
    pub backbones: Vec<BackboneId>,
    /// Row order, a subset of the registry in registry order.
    pub classifiers: Vec<ClassifierId>,
    cells: BTreeMap<ClassifierId, BTreeMap<BackboneId, f64>>,
}

impl Leaderboard {
    pub fn new(classifiers: Vec<ClassifierId>, backbones: Vec<BackboneId>) -> Leaderboard {
        Leaderboard {
            backbones,
            classifiers,
            cells: BTreeMap::new(),
        }
    }

    /// Record one cell. Accuracies must be fractions in [0, 1].
    pub fn set(
        &mut self,
        classifier: ClassifierId,
        backbone: BackboneId,
        accuracy: f64,
    ) -> Result<()> {
        if !(0.0..=1.0).contains(&accuracy) {
            return Err(Error::Selection {
                reason: format!("accuracy {accuracy} for {classifier}/{backbone} is not in [0, 1]"),
            });
        }
        if !self.classifiers.contains(&classifier) || !self.backbones.contains(&backbone) {
            return Err(Error::Selection {
                reason: format!("cell {classifier}/{backbone} is outside the configured grid"),
            });
        }
        self.cells.entry(classifier).or_default().insert(backbone, accuracy);
        Ok(())
    }

    pub fn get(&self, classifier: ClassifierId, backbone: BackboneId) -> Option<f64> {
        self.cells.get(&classifier).and_then(|row| row.get(&backbone)).copied()
    }

    /// Error out unless every configured cell has a value.
    pub fn require_complete(&self) -> Result<()> {
        let mut missing = Vec::new();
        for &classifier in &self.classifiers {
            for &backbone in &self.backbones {
                if self.get(classifier, backbone).is_none() {
                    missing.push(format!("{classifier}/{backbone}"));
                }
            }
        }
        if missing.is_empty() {
            Ok(())
        } else {
            Err(Error::IncompleteGrid {
                missing: missing.join(", "),
            })
        }
    }

    /// Mean accuracy for one classifier across all configured backbones.
    pub fn average_across_backbones(&self, classifier: ClassifierId) -> Result<f64> {
        self.require_complete()?;
        if !self.classifiers.contains(&classifier) {
            return Err(Error::Selection {
                reason: format!("classifier {classifier} is not on the leaderboard"),
            });
        }
        let row = &self.cells[&classifier];
        let sum: f64 = self.backbones.iter().map(|b| row[b]).sum();
        Ok(sum / self.backbones.len() as f64)
    }

    /// Average for every classifier, in row order. Requires a complete grid.
    pub fn row_averages(&self) -> Result<Vec<(ClassifierId, f64)>> {
        self.classifiers
            .iter()
            .map(|&c| Ok((c, self.average_across_backbones(c)?)))
            .collect()
    }

    /// Accuracy for one classifier under a single backbone.
    pub fn cell_score(&self, classifier: ClassifierId, backbone: BackboneId) -> Result<f64> {
        self.require_complete()?;
        self.get(classifier, backbone).ok_or_else(|| Error::Selection {
            reason: format!("cell {classifier}/{backbone} is outside the configured grid"),
        })
    }
}

/// Assemble a registry-shaped leaderboard from (classifier, backbone,
/// accuracy) triples.
///
/// Columns appear in first-seen order. The resulting grid must be complete:
/// every registry classifier needs a cell under every mentioned backbone,
/// otherwise the averages would be biased by the missing cells.
pub fn build_leaderboard(results: &[(ClassifierId, BackboneId, f64)]) -> Result<Leaderboard> {
    let mut backbones: Vec<BackboneId> = Vec::new();
    for &(_, backbone, _) in results {
        if !backbones.contains(&backbone) {
            backbones.push(backbone);
        }
    }
    let mut board = Leaderboard::new(ClassifierId::ALL.to_vec(), backbones);
    for &(classifier, backbone, accuracy) in results {
        board.set(classifier, backbone, accuracy)?;
    }
    board.require_complete()?;
    Ok(board)
}
