//! Top-k classifier selection from the leaderboard.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::BackboneId;
use crate::zoo::ClassifierId;

use super::leaderboard::Leaderboard;

/// How a classifier's ranking score is derived from the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "criterion", content = "backbone")]
pub enum SelectionCriterion {
    /// Rank by mean accuracy across every configured backbone.
    AverageAcrossBackbones,
    /// Rank by accuracy under one specific backbone.
    PerBackbone(BackboneId),
}

impl Default for SelectionCriterion {
    fn default() -> Self {
        SelectionCriterion::AverageAcrossBackbones
    }
}

/// Scores are compared at reporting precision: accuracies are published
/// rounded to 0.01%, so differences beyond the fourth decimal of the fraction
/// are presentation noise, not evidence one classifier beats another.
const SCORE_QUANTUM: f64 = 1e4;

/// An accuracy collapsed to reporting precision (0.01% steps), for every
/// comparison that must treat presentation-identical scores as tied.
pub fn quantize_score(score: f64) -> i64 {
    (score * SCORE_QUANTUM).round() as i64
}

fn quantize(score: f64) -> i64 {
    quantize_score(score)
}

/// The `k` best classifiers by the criterion, best first.
///
/// Ties at reporting precision resolve to registry order, which keeps the
/// selection stable run to run and independent of float noise in the last
/// digits of a fold average.
pub fn select_top_k(
    board: &Leaderboard,
    k: usize,
    criterion: SelectionCriterion,
) -> Result<Vec<ClassifierId>> {
    board.require_complete()?;
    if k == 0 {
        return Err(Error::Selection {
            reason: "cannot select zero classifiers".into(),
        });
    }
    if k > board.classifiers.len() {
        return Err(Error::Selection {
            reason: format!(
                "cannot select {k} classifiers from a leaderboard of {}",
                board.classifiers.len()
            ),
        });
    }
    let mut ranked: Vec<(ClassifierId, i64)> = Vec::with_capacity(board.classifiers.len());
    for &classifier in &board.classifiers {
        let score = match criterion {
            SelectionCriterion::AverageAcrossBackbones => {
                board.average_across_backbones(classifier)?
            }
            SelectionCriterion::PerBackbone(backbone) => board.cell_score(classifier, backbone)?,
        };
        ranked.push((classifier, quantize(score)));
    }
    // `classifiers` is already in registry order; a stable sort keeps that
    // order within tied scores.
    ranked.sort_by(|a, b| b.1.cmp(&a.1));
    Ok(ranked.into_iter().take(k).map(|(c, _)| c).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn board(cells: &[(ClassifierId, f64)]) -> Leaderboard {
        let mut b = Leaderboard::new(
            cells.iter().map(|c| c.0).collect(),
            vec![BackboneId::Mock],
        );
        for &(classifier, accuracy) in cells {
            b.set(classifier, BackboneId::Mock, accuracy).unwrap();
        }
        b
    }

    #[test]
    fn ranks_by_score_descending() {
        let b = board(&[
            (ClassifierId::Rf, 0.90),
            (ClassifierId::Svm, 0.97),
            (ClassifierId::Lr, 0.95),
            (ClassifierId::Mlp, 0.96),
        ]);
        let top = select_top_k(&b, 3, SelectionCriterion::PerBackbone(BackboneId::Mock)).unwrap();
        assert_eq!(top, vec![ClassifierId::Svm, ClassifierId::Mlp, ClassifierId::Lr]);
    }

    #[test]
    fn ties_at_reporting_precision_fall_back_to_registry_order() {
        // 0.97001 and 0.96998 both round to 97.00%: Svm outranks Mlp only
        // because svm comes first in the registry.
        let b = board(&[
            (ClassifierId::Svm, 0.96998),
            (ClassifierId::Mlp, 0.97001),
            (ClassifierId::Xgb, 0.90),
        ]);
        let top = select_top_k(&b, 2, SelectionCriterion::PerBackbone(BackboneId::Mock)).unwrap();
        assert_eq!(top, vec![ClassifierId::Svm, ClassifierId::Mlp]);
    }

    #[test]
    fn differences_above_the_quantum_still_rank() {
        let b = board(&[(ClassifierId::Svm, 0.9699), (ClassifierId::Mlp, 0.9701)]);
        let top = select_top_k(&b, 2, SelectionCriterion::PerBackbone(BackboneId::Mock)).unwrap();
        assert_eq!(top, vec![ClassifierId::Mlp, ClassifierId::Svm]);
    }

    #[test]
    fn average_criterion_uses_row_means() {
        let mut b = Leaderboard::new(
            vec![ClassifierId::Rf, ClassifierId::Svm],
            vec![BackboneId::Vgg16, BackboneId::Mock],
        );
        // Rf: mean 0.90; Svm: mean 0.89 despite the higher single cell.
        b.set(ClassifierId::Rf, BackboneId::Vgg16, 0.90).unwrap();
        b.set(ClassifierId::Rf, BackboneId::Mock, 0.90).unwrap();
        b.set(ClassifierId::Svm, BackboneId::Vgg16, 0.98).unwrap();
        b.set(ClassifierId::Svm, BackboneId::Mock, 0.80).unwrap();
        let top = select_top_k(&b, 1, SelectionCriterion::AverageAcrossBackbones).unwrap();
        assert_eq!(top, vec![ClassifierId::Rf]);
        let top = select_top_k(&b, 1, SelectionCriterion::PerBackbone(BackboneId::Vgg16)).unwrap();
        assert_eq!(top, vec![ClassifierId::Svm]);
    }

    #[test]
    fn k_bounds_are_enforced() {
        let b = board(&[(ClassifierId::Rf, 0.9)]);
        assert!(matches!(
            select_top_k(&b, 0, SelectionCriterion::PerBackbone(BackboneId::Mock)),
            Err(Error::Selection { .. })
        ));
        assert!(matches!(
            select_top_k(&b, 2, SelectionCriterion::PerBackbone(BackboneId::Mock)),
            Err(Error::Selection { .. })
        ));
    }

    #[test]
    fn incomplete_grid_cannot_be_ranked() {
        let mut b = Leaderboard::new(vec![ClassifierId::Rf], vec![BackboneId::Mock]);
        let err = select_top_k(&b, 1, SelectionCriterion::AverageAcrossBackbones).unwrap_err();
        assert!(matches!(err, Error::IncompleteGrid { .. }));
        b.set(ClassifierId::Rf, BackboneId::Mock, 0.5).unwrap();
        assert!(select_top_k(&b, 1, SelectionCriterion::AverageAcrossBackbones).is_ok());
    }

    #[test]
    fn criterion_serde_round_trips() {
        for criterion in [
            SelectionCriterion::AverageAcrossBackbones,
            SelectionCriterion::PerBackbone(BackboneId::Vgg19),
        ] {
            let json = serde_json::to_string(&criterion).unwrap();
            let back: SelectionCriterion = serde_json::from_str(&json).unwrap();
            assert_eq!(criterion, back);
        }
    }
}
