//! Hard and soft voting over classifier outputs.

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::zoo::TrainedModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VotingMode {
    /// Each member casts its weight for its predicted label; the label with
    /// the largest total wins.
    Hard,
    /// Member probability rows are averaged under the weights; the largest
    /// averaged probability wins.
    Soft,
}

impl VotingMode {
    pub const ALL: [VotingMode; 2] = [VotingMode::Hard, VotingMode::Soft];

    pub fn as_str(self) -> &'static str {
        match self {
            VotingMode::Hard => "hard",
            VotingMode::Soft => "soft",
        }
    }
}

impl std::fmt::Display for VotingMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for VotingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<VotingMode> {
        match s {
            "hard" => Ok(VotingMode::Hard),
            "soft" => Ok(VotingMode::Soft),
            other => Err(Error::Config(format!(
                "unknown voting mode {other:?}, expected hard or soft"
            ))),
        }
    }
}

/// Weights must pair one-to-one with members, be finite and non-negative,
/// and carry some mass.
pub fn validate_weights(weights: &[f64], n_members: usize) -> Result<()> {
    if weights.len() != n_members {
        return Err(Error::InvalidWeights {
            reason: format!("{} weights for {} members", weights.len(), n_members),
        });
    }
    if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
        return Err(Error::InvalidWeights {
            reason: format!("weight {w} is not a finite non-negative number"),
        });
    }
    if weights.iter().sum::<f64>() <= 0.0 {
        return Err(Error::InvalidWeights {
            reason: "weights sum to zero".into(),
        });
    }
    Ok(())
}

/// Index of the strictly largest entry; ties resolve to the lowest index.
fn argmax(row: &[f64]) -> usize {
    let mut best = 0usize;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Weighted majority vote over per-member label predictions.
///
/// `predictions[m][i]` is member `m`'s label for sample `i`; labels must lie
/// in `0..n_classes`. A tied tally goes to the lowest label.
pub fn hard_vote(
    predictions: &[Vec<u32>],
    weights: &[f64],
    n_classes: usize,
) -> Result<Vec<u32>> {
    if predictions.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    validate_weights(weights, predictions.len())?;
    if n_classes == 0 {
        return Err(Error::DegenerateLabels {
            reason: "hard vote over zero classes".into(),
        });
    }
    let n = predictions[0].len();
    for member in predictions {
        if member.len() != n {
            return Err(Error::shape(
                "hard vote members",
                format!("{n} predictions"),
                format!("{} predictions", member.len()),
            ));
        }
    }
    let mut out = Vec::with_capacity(n);
    let mut tally = vec![0.0f64; n_classes];
    for i in 0..n {
        tally.iter_mut().for_each(|t| *t = 0.0);
        for (member, &weight) in predictions.iter().zip(weights) {
            let label = member[i] as usize;
            if label >= n_classes {
                return Err(Error::Label {
                    label: member[i],
                    classes: n_classes,
                });
            }
            tally[label] += weight;
        }
        out.push(argmax(&tally) as u32);
    }
    Ok(out)
}

fn check_prob_shapes(probabilities: &[ArrayView2<f64>]) -> Result<(usize, usize)> {
    if probabilities.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    let (n, k) = probabilities[0].dim();
    for member in probabilities {
        if member.dim() != (n, k) {
            return Err(Error::shape(
                "soft vote members",
                format!("{n}x{k}"),
                format!("{}x{}", member.nrows(), member.ncols()),
            ));
        }
    }
    Ok((n, k))
}

/// Weighted mean of the member probability matrices, renormalized by the
/// weight mass so rows stay on the simplex.
pub fn soft_vote_probs(
    probabilities: &[ArrayView2<f64>],
    weights: &[f64],
) -> Result<Array2<f64>> {
    let (n, k) = check_prob_shapes(probabilities)?;
    validate_weights(weights, probabilities.len())?;
    let mut out = Array2::<f64>::zeros((n, k));
    for (member, &weight) in probabilities.iter().zip(weights) {
        out.scaled_add(weight, member);
    }
    let mass: f64 = weights.iter().sum();
    out.mapv_inplace(|v| v / mass);
    Ok(out)
}

/// Class column with the largest weighted probability sum per sample; a tied
/// sum goes to the lowest column.
pub fn soft_vote(probabilities: &[ArrayView2<f64>], weights: &[f64]) -> Result<Vec<u32>> {
    let (n, k) = check_prob_shapes(probabilities)?;
    validate_weights(weights, probabilities.len())?;
    let mut out = Vec::with_capacity(n);
    let mut tally = vec![0.0f64; k];
    for i in 0..n {
        tally.iter_mut().for_each(|t| *t = 0.0);
        for (member, &weight) in probabilities.iter().zip(weights) {
            for (c, t) in tally.iter_mut().enumerate() {
                *t += weight * member[[i, c]];
            }
        }
        out.push(argmax(&tally) as u32);
    }
    Ok(out)
}

/// A voting ensemble over trained classifiers sharing one label set.
#[derive(Debug)]
pub struct EnsembleModel {
    pub members: Vec<TrainedModel>,
    pub weights: Vec<f64>,
    pub mode: VotingMode,
}

impl EnsembleModel {
    /// `weights: None` means equal weights.
    pub fn new(
        members: Vec<TrainedModel>,
        weights: Option<Vec<f64>>,
        mode: VotingMode,
    ) -> Result<EnsembleModel> {
        if members.is_empty() {
            return Err(Error::EmptyEnsemble);
        }
        let weights = weights.unwrap_or_else(|| vec![1.0; members.len()]);
        validate_weights(&weights, members.len())?;
        let classes = &members[0].classes;
        for member in &members[1..] {
            if &member.classes != classes {
                return Err(Error::Bundle {
                    path: std::path::PathBuf::new(),
                    reason: format!(
                        "ensemble members disagree on classes: {:?} vs {:?}",
                        classes, member.classes
                    ),
                });
            }
        }
        Ok(EnsembleModel {
            members,
            weights,
            mode,
        })
    }

    pub fn classes(&self) -> &[u32] {
        &self.members[0].classes
    }

    /// Predicted labels for a feature batch.
    pub fn predict(&self, x: ArrayView2<f32>) -> Result<Vec<u32>> {
        let classes = self.classes();
        match self.mode {
            VotingMode::Hard => {
                let mut votes = Vec::with_capacity(self.members.len());
                for member in &self.members {
                    let labels = member.predict(x)?;
                    // Tally by class position so ties break on the lowest
                    // label value (classes are sorted ascending).
                    let positions: Vec<u32> = labels
                        .iter()
                        .map(|l| {
                            classes.binary_search(l).expect("member predicts own classes") as u32
                        })
                        .collect();
                    votes.push(positions);
                }
                let winners = hard_vote(&votes, &self.weights, classes.len())?;
                Ok(winners.into_iter().map(|c| classes[c as usize]).collect())
            }
            VotingMode::Soft => {
                let probs: Vec<Array2<f64>> = self
                    .members
                    .iter()
                    .map(|m| m.predict_proba(x))
                    .collect::<Result<_>>()?;
                let views: Vec<ArrayView2<f64>> = probs.iter().map(|p| p.view()).collect();
                let winners = soft_vote(&views, &self.weights)?;
                Ok(winners.into_iter().map(|c| classes[c as usize]).collect())
            }
        }
    }

    /// Per-class scores, columns following `classes()`.
    ///
    /// Soft mode returns the weighted mean probabilities. Hard mode returns
    /// each class's share of the weighted votes, which is a coarse simplex
    /// (at most one distinct value per member subset), not a calibrated
    /// probability.
    pub fn predict_proba(&self, x: ArrayView2<f32>) -> Result<Array2<f64>> {
        let classes = self.classes();
        match self.mode {
            VotingMode::Soft => {
                let probs: Vec<Array2<f64>> = self
                    .members
                    .iter()
                    .map(|m| m.predict_proba(x))
                    .collect::<Result<_>>()?;
                let views: Vec<ArrayView2<f64>> = probs.iter().map(|p| p.view()).collect();
                soft_vote_probs(&views, &self.weights)
            }
            VotingMode::Hard => {
                let mut out = Array2::<f64>::zeros((x.nrows(), classes.len()));
                for (member, &weight) in self.members.iter().zip(&self.weights) {
                    let labels = member.predict(x)?;
                    for (i, label) in labels.iter().enumerate() {
                        let c = classes.binary_search(label).expect("member predicts own classes");
                        out[[i, c]] += weight;
                    }
                }
                let mass: f64 = self.weights.iter().sum();
                out.mapv_inplace(|v| v / mass);
                Ok(out)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn hard_vote_majority_and_tie_break() {
        let predictions = vec![vec![0u32, 1, 2], vec![0, 1, 1], vec![1, 1, 2]];
        let weights = [1.0, 1.0, 1.0];
        let out = hard_vote(&predictions, &weights, 3).unwrap();
        // Sample 0: two votes for 0. Sample 1: unanimous. Sample 2: 2 vs 1.
        assert_eq!(out, vec![0, 1, 2]);

        // One member per label: full tie, lowest label wins.
        let tie = vec![vec![2u32], vec![0], vec![1]];
        assert_eq!(hard_vote(&tie, &weights, 3).unwrap(), vec![0]);
    }

    #[test]
    fn hard_vote_weights_shift_the_winner() {
        let predictions = vec![vec![0u32], vec![1], vec![1]];
        assert_eq!(hard_vote(&predictions, &[1.0, 1.0, 1.0], 2).unwrap(), vec![1]);
        assert_eq!(hard_vote(&predictions, &[5.0, 1.0, 1.0], 2).unwrap(), vec![0]);
    }

    #[test]
    fn soft_vote_averages_and_breaks_ties_low() {
        let a = array![[0.6, 0.4], [0.5, 0.5]];
        let b = array![[0.2, 0.8], [0.5, 0.5]];
        let views = [a.view(), b.view()];
        // Sample 0: mean (0.4, 0.6) -> class 1. Sample 1: exact tie -> 0.
        assert_eq!(soft_vote(&views, &[1.0, 1.0]).unwrap(), vec![1, 0]);

        let probs = soft_vote_probs(&views, &[1.0, 1.0]).unwrap();
        assert!((probs[[0, 0]] - 0.4).abs() < 1e-15);
        assert!((probs[[0, 1]] - 0.6).abs() < 1e-15);
    }

    #[test]
    fn soft_vote_weighting_matches_hand_computation() {
        let a = array![[0.9, 0.1]];
        let b = array![[0.2, 0.8]];
        let views = [a.view(), b.view()];
        let probs = soft_vote_probs(&views, &[3.0, 1.0]).unwrap();
        // (3*0.9 + 0.2)/4 = 0.725.
        assert!((probs[[0, 0]] - 0.725).abs() < 1e-15);
        assert_eq!(soft_vote(&views, &[3.0, 1.0]).unwrap(), vec![0]);
        assert_eq!(soft_vote(&views, &[1.0, 3.0]).unwrap(), vec![1]);
    }

    #[test]
    fn validation_errors() {
        assert!(matches!(
            hard_vote(&[], &[], 2),
            Err(Error::EmptyEnsemble)
        ));
        assert!(matches!(
            hard_vote(&[vec![0u32]], &[1.0, 2.0], 2),
            Err(Error::InvalidWeights { .. })
        ));
        assert!(matches!(
            hard_vote(&[vec![0u32]], &[-1.0], 2),
            Err(Error::InvalidWeights { .. })
        ));
        assert!(matches!(
            hard_vote(&[vec![0u32]], &[0.0], 2),
            Err(Error::InvalidWeights { .. })
        ));
        assert!(matches!(
            hard_vote(&[vec![5u32]], &[1.0], 2),
            Err(Error::Label { .. })
        ));
        assert!(matches!(
            hard_vote(&[vec![0u32, 1], vec![0u32]], &[1.0, 1.0], 2),
            Err(Error::Shape { .. })
        ));

        let a = array![[0.5, 0.5]];
        let b = array![[0.3, 0.3, 0.4]];
        assert!(matches!(
            soft_vote(&[a.view(), b.view()], &[1.0, 1.0]),
            Err(Error::Shape { .. })
        ));
    }

    #[test]
    fn mode_strings_round_trip() {
        for mode in VotingMode::ALL {
            assert_eq!(mode.as_str().parse::<VotingMode>().unwrap(), mode);
        }
        assert!("plurality".parse::<VotingMode>().is_err());
        assert_eq!(serde_json::to_string(&VotingMode::Soft).unwrap(), "\"soft\"");
    }
}
