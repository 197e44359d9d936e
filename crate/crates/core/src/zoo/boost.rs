//! Gradient-boosted decision trees with a softmax objective.
//!
//! One shared second-order boosting core drives two tree growers: depth-wise
//! growth with exact greedy splits (the `xgb` classifier) and leaf-wise
//! best-first growth over histogram bins (the `lgb` classifier). Split gain is
//! the usual regularized reduction
//! `1/2 * (GL^2/(HL+lambda) + GR^2/(HR+lambda) - G^2/(H+lambda)) - gamma`
//! and leaf weights are `-G / (H + lambda)`.

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::Result;

use super::logistic::softmax_rows;
use super::ClassifierSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RegNode {
    Split {
        feature: u32,
        threshold: f32,
        left: u32,
        right: u32,
    },
    Leaf {
        weight: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegTree {
    pub nodes: Vec<RegNode>,
}

impl RegTree {
    pub fn predict(&self, row: &[f32]) -> f64 {
        let mut at = 0usize;
        loop {
            match &self.nodes[at] {
                RegNode::Leaf { weight } => return *weight,
                RegNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if row[*feature as usize] <= *threshold {
                        *left as usize
                    } else {
                        *right as usize
                    };
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostModel {
    /// `trees[round][class]`.
    pub trees: Vec<Vec<RegTree>>,
    pub learning_rate: f64,
    pub n_classes: usize,
    pub n_features: usize,
}

struct GainParams {
    lambda: f64,
    gamma: f64,
    min_child_weight: f64,
    min_data_in_leaf: usize,
}

fn leaf_weight(g: f64, h: f64, lambda: f64) -> f64 {
    -g / (h + lambda)
}

fn split_gain(gl: f64, hl: f64, gr: f64, hr: f64, params: &GainParams) -> f64 {
    let score = |g: f64, h: f64| g * g / (h + params.lambda);
    0.5 * (score(gl, hl) + score(gr, hr) - score(gl + gr, hl + hr)) - params.gamma
}

/// Best exact split of `indices` on any feature: highest gain, ties to the
/// lowest feature then the lowest threshold. Returns `None` when no split
/// beats gain zero under the constraints.
fn best_exact_split(
    x: ArrayView2<f32>,
    grad: &[f64],
    hess: &[f64],
    indices: &[usize],
    params: &GainParams,
) -> Option<(u32, f32, f64)> {
    let d = x.ncols();
    let g_total: f64 = indices.iter().map(|&i| grad[i]).sum();
    let h_total: f64 = indices.iter().map(|&i| hess[i]).sum();
    let mut best: Option<(u32, f32, f64)> = None;
    let mut column: Vec<(f32, f64, f64)> = Vec::with_capacity(indices.len());
    for f in 0..d {
        column.clear();
        for &i in indices {
            column.push((x[[i, f]], grad[i], hess[i]));
        }
        column.sort_unstable_by(|a, b| a.0.partial_cmp(&b.0).expect("finite features"));
        let mut gl = 0.0f64;
        let mut hl = 0.0f64;
        for split_at in 1..column.len() {
            let (prev_value, g, h) = column[split_at - 1];
            gl += g;
            hl += h;
            let value = column[split_at].0;
            if value <= prev_value {
                continue;
            }
            if split_at < params.min_data_in_leaf
                || column.len() - split_at < params.min_data_in_leaf
            {
                continue;
            }
            let gr = g_total - gl;
            let hr = h_total - hl;
            if hl < params.min_child_weight || hr < params.min_child_weight {
                continue;
            }
            let gain = split_gain(gl, hl, gr, hr, params);
            if gain <= 0.0 {
                continue;
            }
            let threshold = (prev_value + value) / 2.0;
            let candidate = (f as u32, threshold, gain);
            best = match best {
                None => Some(candidate),
                Some(current) => {
                    if gain > current.2
                        || (gain == current.2 && (candidate.0, threshold) < (current.0, current.1))
                    {
                        Some(candidate)
                    } else {
                        Some(current)
                    }
                }
            };
        }
    }
    best
}

/// Depth-wise exact tree on gradient/hessian targets. Also records each
/// training sample's leaf weight into `out_values`.
fn grow_depthwise(
    x: ArrayView2<f32>,
    grad: &[f64],
    hess: &[f64],
    indices: Vec<usize>,
    max_depth: usize,
    params: &GainParams,
    out_values: &mut [f64],
) -> RegTree {
    struct Frame {
        indices: Vec<usize>,
        depth: usize,
        slot: usize,
    }
    let mut nodes: Vec<RegNode> = vec![RegNode::Leaf { weight: 0.0 }];
    let mut stack = vec![Frame {
        indices,
        depth: 0,
        slot: 0,
    }];
    while let Some(frame) = stack.pop() {
        let make_leaf = |nodes: &mut Vec<RegNode>, out_values: &mut [f64], idx: &[usize], slot: usize| {
            let g: f64 = idx.iter().map(|&i| grad[i]).sum();
            let h: f64 = idx.iter().map(|&i| hess[i]).sum();
            let weight = leaf_weight(g, h, params.lambda);
            nodes[slot] = RegNode::Leaf { weight };
            for &i in idx {
                out_values[i] = weight;
            }
        };
        if frame.depth >= max_depth || frame.indices.len() < 2 {
            make_leaf(&mut nodes, out_values, &frame.indices, frame.slot);
            continue;
        }
        match best_exact_split(x, grad, hess, &frame.indices, params) {
            None => make_leaf(&mut nodes, out_values, &frame.indices, frame.slot),
            Some((feature, threshold, _gain)) => {
                let (left_idx, right_idx): (Vec<usize>, Vec<usize>) = frame
                    .indices
                    .iter()
                    .partition(|&&i| x[[i, feature as usize]] <= threshold);
                nodes.push(RegNode::Leaf { weight: 0.0 });
                let left_slot = nodes.len() - 1;
                nodes.push(RegNode::Leaf { weight: 0.0 });
                let right_slot = nodes.len() - 1;
                nodes[frame.slot] = RegNode::Split {
                    feature,
                    threshold,
                    left: left_slot as u32,
                    right: right_slot as u32,
                };
                stack.push(Frame {
                    indices: left_idx,
                    depth: frame.depth + 1,
                    slot: left_slot,
                });
                stack.push(Frame {
                    indices: right_idx,
                    depth: frame.depth + 1,
                    slot: right_slot,
                });
            }
        }
    }
    RegTree { nodes }
}

/// Histogram bin edges per feature: real-valued thresholds at which a split
/// can occur, at most `max_bins - 1` of them.
fn build_bins(x: ArrayView2<f32>, max_bins: usize) -> Vec<Vec<f32>> {
    let n = x.nrows();
    let d = x.ncols();
    let mut edges = Vec::with_capacity(d);
    for f in 0..d {
        let mut values: Vec<f32> = (0..n).map(|i| x[[i, f]]).collect();
        values.sort_unstable_by(|a, b| a.partial_cmp(b).expect("finite features"));
        values.dedup();
        let thresholds: Vec<f32> = if values.len() <= max_bins {
            values
                .windows(2)
                .map(|w| (w[0] + w[1]) / 2.0)
                .collect()
        } else {
            // Evenly spaced quantile cuts over the distinct values.
            let mut cuts = Vec::with_capacity(max_bins - 1);
            for b in 1..max_bins {
                let pos = b * values.len() / max_bins;
                let pos = pos.clamp(1, values.len() - 1);
                cuts.push((values[pos - 1] + values[pos]) / 2.0);
            }
            cuts.dedup();
            cuts
        };
        edges.push(thresholds);
    }
    edges
}

/// Bin index of `value` given ascending thresholds: number of thresholds
/// strictly below it (values equal to a threshold go left, matching the
/// `<= threshold` predicate at predict time).
fn bin_of(thresholds: &[f32], value: f32) -> usize {
    thresholds.partition_point(|&t| t < value)
}

struct LeafCandidate {
    indices: Vec<usize>,
    slot: usize,
    // Best split found for this leaf, if any.
    split: Option<(u32, f32, f64)>, // (feature, threshold, gain)
}

/// Best histogram split for one leaf.
fn best_histogram_split(
    binned: &[Vec<u16>],
    edges: &[Vec<f32>],
    grad: &[f64],
    hess: &[f64],
    indices: &[usize],
    params: &GainParams,
) -> Option<(u32, f32, f64)> {
    let g_total: f64 = indices.iter().map(|&i| grad[i]).sum();
    let h_total: f64 = indices.iter().map(|&i| hess[i]).sum();
    let mut best: Option<(u32, f32, f64)> = None;
    for (f, thresholds) in edges.iter().enumerate() {
        if thresholds.is_empty() {
            continue;
        }
        let n_bins = thresholds.len() + 1;
        let mut hist_g = vec![0.0f64; n_bins];
        let mut hist_h = vec![0.0f64; n_bins];
        let mut hist_n = vec![0usize; n_bins];
        let column = &binned[f];
        for &i in indices {
            let b = column[i] as usize;
            hist_g[b] += grad[i];
            hist_h[b] += hess[i];
            hist_n[b] += 1;
        }
        let mut gl = 0.0f64;
        let mut hl = 0.0f64;
        let mut nl = 0usize;
        // Splitting after bin b sends bins 0..=b left.
        for b in 0..n_bins - 1 {
            gl += hist_g[b];
            hl += hist_h[b];
            nl += hist_n[b];
            if nl < params.min_data_in_leaf || indices.len() - nl < params.min_data_in_leaf {
                continue;
            }
            let gr = g_total - gl;
            let hr = h_total - hl;
            if hl < params.min_child_weight || hr < params.min_child_weight {
                continue;
            }
            let gain = split_gain(gl, hl, gr, hr, params);
            if gain <= 0.0 {
                continue;
            }
            let threshold = thresholds[b];
            let candidate = (f as u32, threshold, gain);
            best = match best {
                None => Some(candidate),
                Some(current) => {
                    if gain > current.2
                        || (gain == current.2 && (candidate.0, threshold) < (current.0, current.1))
                    {
                        Some(candidate)
                    } else {
                        Some(current)
                    }
                }
            };
        }
    }
    best
}

/// Leaf-wise best-first tree over histogram bins. Grows whichever leaf has
/// the highest-gain split until `num_leaves` is reached or no leaf improves.
#[allow(clippy::too_many_arguments)]
fn grow_leafwise(
    x: ArrayView2<f32>,
    binned: &[Vec<u16>],
    edges: &[Vec<f32>],
    grad: &[f64],
    hess: &[f64],
    num_leaves: usize,
    params: &GainParams,
    out_values: &mut [f64],
) -> RegTree {
    let all: Vec<usize> = (0..x.nrows()).collect();
    let mut nodes: Vec<RegNode> = vec![RegNode::Leaf { weight: 0.0 }];
    let root_split = best_histogram_split(binned, edges, grad, hess, &all, params);
    let mut leaves = vec![LeafCandidate {
        indices: all,
        slot: 0,
        split: root_split,
    }];

    while leaves.len() < num_leaves {
        // Highest positive gain; ties resolve to the earliest-created leaf.
        let mut chosen: Option<usize> = None;
        for (li, leaf) in leaves.iter().enumerate() {
            if let Some((_, _, gain)) = leaf.split {
                let better = match chosen {
                    None => true,
                    Some(current) => {
                        let current_gain = leaves[current].split.expect("chosen has a split").2;
                        gain > current_gain
                    }
                };
                if better {
                    chosen = Some(li);
                }
            }
        }
        let Some(li) = chosen else { break };
        let LeafCandidate {
            indices,
            slot,
            split,
        } = leaves.swap_remove(li);
        let (feature, threshold, _gain) = split.expect("chosen leaf has a split");
        let (left_idx, right_idx): (Vec<usize>, Vec<usize>) = indices
            .iter()
            .partition(|&&i| x[[i, feature as usize]] <= threshold);
        nodes.push(RegNode::Leaf { weight: 0.0 });
        let left_slot = nodes.len() - 1;
        nodes.push(RegNode::Leaf { weight: 0.0 });
        let right_slot = nodes.len() - 1;
        nodes[slot] = RegNode::Split {
            feature,
            threshold,
            left: left_slot as u32,
            right: right_slot as u32,
        };
        let left_split = best_histogram_split(binned, edges, grad, hess, &left_idx, params);
        let right_split = best_histogram_split(binned, edges, grad, hess, &right_idx, params);
        leaves.push(LeafCandidate {
            indices: left_idx,
            slot: left_slot,
            split: left_split,
        });
        leaves.push(LeafCandidate {
            indices: right_idx,
            slot: right_slot,
            split: right_split,
        });
    }

    for leaf in leaves {
        let g: f64 = leaf.indices.iter().map(|&i| grad[i]).sum();
        let h: f64 = leaf.indices.iter().map(|&i| hess[i]).sum();
        let weight = leaf_weight(g, h, params.lambda);
        nodes[leaf.slot] = RegNode::Leaf { weight };
        for &i in &leaf.indices {
            out_values[i] = weight;
        }
    }
    RegTree { nodes }
}

enum Growth {
    Depthwise { max_depth: usize },
    Leafwise { num_leaves: usize, max_bins: usize },
}

fn train_boost(
    spec: &ClassifierSpec,
    x: ArrayView2<f32>,
    y: &[usize],
    n_classes: usize,
    growth: Growth,
    params: GainParams,
) -> Result<BoostModel> {
    let n_rounds = spec.param_usize("n_rounds");
    let learning_rate = spec.param("learning_rate");
    let n = x.nrows();

    let (binned, edges) = match &growth {
        Growth::Leafwise { max_bins, .. } => {
            let edges = build_bins(x, *max_bins);
            let binned: Vec<Vec<u16>> = edges
                .iter()
                .enumerate()
                .map(|(f, thresholds)| {
                    (0..n).map(|i| bin_of(thresholds, x[[i, f]]) as u16).collect()
                })
                .collect();
            (binned, edges)
        }
        Growth::Depthwise { .. } => (Vec::new(), Vec::new()),
    };

    // Raw scores F, updated additively per round and class.
    let mut scores = Array2::<f64>::zeros((n, n_classes));
    let mut trees: Vec<Vec<RegTree>> = Vec::with_capacity(n_rounds);
    let mut grad = vec![0.0f64; n];
    let mut hess = vec![0.0f64; n];
    let mut leaf_values = vec![0.0f64; n];

    for _round in 0..n_rounds {
        let mut probs = scores.clone();
        softmax_rows(&mut probs);
        let mut round_trees = Vec::with_capacity(n_classes);
        for class in 0..n_classes {
            for i in 0..n {
                let p = probs[[i, class]];
                grad[i] = p - if y[i] == class { 1.0 } else { 0.0 };
                hess[i] = (p * (1.0 - p)).max(1e-16);
            }
            leaf_values.iter_mut().for_each(|v| *v = 0.0);
            let tree = match &growth {
                Growth::Depthwise { max_depth } => grow_depthwise(
                    x,
                    &grad,
                    &hess,
                    (0..n).collect(),
                    *max_depth,
                    &params,
                    &mut leaf_values,
                ),
                Growth::Leafwise { num_leaves, .. } => grow_leafwise(
                    x,
                    &binned,
                    &edges,
                    &grad,
                    &hess,
                    *num_leaves,
                    &params,
                    &mut leaf_values,
                ),
            };
            for i in 0..n {
                scores[[i, class]] += learning_rate * leaf_values[i];
            }
            round_trees.push(tree);
        }
        trees.push(round_trees);
    }

    Ok(BoostModel {
        trees,
        learning_rate,
        n_classes,
        n_features: x.ncols(),
    })
}

/// Depth-wise exact boosting (the `xgb` classifier defaults).
pub fn train_xgb(
    spec: &ClassifierSpec,
    x: ArrayView2<f32>,
    y: &[usize],
    n_classes: usize,
) -> Result<BoostModel> {
    train_boost(
        spec,
        x,
        y,
        n_classes,
        Growth::Depthwise {
            max_depth: spec.param_usize("max_depth"),
        },
        GainParams {
            lambda: spec.param("lambda"),
            gamma: spec.param("gamma"),
            min_child_weight: spec.param("min_child_weight"),
            min_data_in_leaf: 1,
        },
    )
}

/// Leaf-wise histogram boosting (the `lgb` classifier defaults).
pub fn train_lgb(
    spec: &ClassifierSpec,
    x: ArrayView2<f32>,
    y: &[usize],
    n_classes: usize,
) -> Result<BoostModel> {
    train_boost(
        spec,
        x,
        y,
        n_classes,
        Growth::Leafwise {
            num_leaves: spec.param_usize("num_leaves"),
            max_bins: spec.param_usize("max_bins"),
        },
        GainParams {
            lambda: spec.param("lambda"),
            gamma: 0.0,
            min_child_weight: 0.0,
            min_data_in_leaf: spec.param_usize("min_data_in_leaf"),
        },
    )
}

pub fn predict_proba(model: &BoostModel, x: ArrayView2<f32>) -> Array2<f64> {
    let n = x.nrows();
    let mut scores = Array2::<f64>::zeros((n, model.n_classes));
    let mut row_buf = vec![0.0f32; x.ncols()];
    for (i, row) in x.outer_iter().enumerate() {
        for (dst, src) in row_buf.iter_mut().zip(row.iter()) {
            *dst = *src;
        }
        for round in &model.trees {
            for (class, tree) in round.iter().enumerate() {
                scores[[i, class]] += model.learning_rate * tree.predict(&row_buf);
            }
        }
    }
    softmax_rows(&mut scores);
    scores
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synth::generate_blobs;
    use crate::zoo::{train as zoo_train, ClassifierId, ModelState};

    #[test]
    fn xgb_fits_separable_blobs() {
        let (x, y) = generate_blobs(3, 25, 8, 3.0, 51);
        let mut spec = ClassifierSpec::new(ClassifierId::Xgb, 0);
        spec.hyperparams.insert("n_rounds".into(), 30.0);
        let model = zoo_train(&spec, x.view(), &y).unwrap();
        let preds = model.predict(x.view()).unwrap();
        let correct = preds.iter().zip(&y).filter(|(a, b)| a == b).count();
        assert!(correct as f64 / y.len() as f64 > 0.97, "{correct}/75");
    }

    #[test]
    fn lgb_fits_separable_blobs() {
        let (x, y) = generate_blobs(3, 25, 8, 3.0, 52);
        let mut spec = ClassifierSpec::new(ClassifierId::Lgb, 0);
        spec.hyperparams.insert("n_rounds".into(), 30.0);
        // Blobs are small; allow leaves below the production default.
        spec.hyperparams.insert("min_data_in_leaf".into(), 3.0);
        let model = zoo_train(&spec, x.view(), &y).unwrap();
        let preds = model.predict(x.view()).unwrap();
        let correct = preds.iter().zip(&y).filter(|(a, b)| a == b).count();
        assert!(correct as f64 / y.len() as f64 > 0.97, "{correct}/75");
    }

    #[test]
    fn both_growers_are_deterministic() {
        let (x, y) = generate_blobs(2, 20, 6, 2.5, 53);
        for id in [ClassifierId::Xgb, ClassifierId::Lgb] {
            let mut spec = ClassifierSpec::new(id, 0);
            spec.hyperparams.insert("n_rounds".into(), 10.0);
            if id == ClassifierId::Lgb {
                spec.hyperparams.insert("min_data_in_leaf".into(), 2.0);
            }
            let a = zoo_train(&spec, x.view(), &y).unwrap();
            let b = zoo_train(&spec, x.view(), &y).unwrap();
            assert_eq!(a.state, b.state, "{id} not deterministic");
        }
    }

    #[test]
    fn tree_counts_match_rounds_and_classes() {
        let (x, y) = generate_blobs(3, 15, 4, 3.0, 54);
        let mut spec = ClassifierSpec::new(ClassifierId::Xgb, 0);
        spec.hyperparams.insert("n_rounds".into(), 7.0);
        let model = zoo_train(&spec, x.view(), &y).unwrap();
        let ModelState::Boost(boost) = &model.state else {
            panic!("wrong state kind");
        };
        assert_eq!(boost.trees.len(), 7);
        assert!(boost.trees.iter().all(|round| round.len() == 3));
    }

    #[test]
    fn leafwise_respects_num_leaves() {
        let (x, y) = generate_blobs(2, 50, 6, 1.5, 55);
        let mut spec = ClassifierSpec::new(ClassifierId::Lgb, 0);
        spec.hyperparams.insert("n_rounds".into(), 3.0);
        spec.hyperparams.insert("num_leaves".into(), 4.0);
        spec.hyperparams.insert("min_data_in_leaf".into(), 2.0);
        let model = zoo_train(&spec, x.view(), &y).unwrap();
        let ModelState::Boost(boost) = &model.state else {
            panic!("wrong state kind");
        };
        for round in &boost.trees {
            for tree in round {
                let leaves = tree
                    .nodes
                    .iter()
                    .filter(|n| matches!(n, RegNode::Leaf { .. }))
                    .count();
                assert!(leaves <= 4, "tree has {leaves} leaves");
            }
        }
    }

    #[test]
    fn exact_split_gain_and_leaf_weights_match_hand_computation() {
        // One feature, values 1..4, gradients [-1,-1,1,1], unit hessians,
        // lambda 1. Best split is at 2.5:
        //   gain = 1/2 * (4/3 + 4/3 - 0) = 4/3
        //   weights = -G/(H+1) = +-2/3
        let x = ndarray::array![[1.0f32], [2.0], [3.0], [4.0]];
        let grad = [-1.0, -1.0, 1.0, 1.0];
        let hess = [1.0, 1.0, 1.0, 1.0];
        let params = GainParams {
            lambda: 1.0,
            gamma: 0.0,
            min_child_weight: 0.0,
            min_data_in_leaf: 1,
        };
        let (feature, threshold, gain) =
            best_exact_split(x.view(), &grad, &hess, &[0, 1, 2, 3], &params).unwrap();
        assert_eq!(feature, 0);
        assert_eq!(threshold, 2.5);
        assert!((gain - 4.0 / 3.0).abs() < 1e-12, "gain {gain}");

        let mut values = [0.0f64; 4];
        let tree = grow_depthwise(x.view(), &grad, &hess, vec![0, 1, 2, 3], 1, &params, &mut values);
        assert_eq!(tree.nodes.len(), 3);
        let expect = 2.0 / 3.0;
        assert!((values[0] - expect).abs() < 1e-12);
        assert!((values[1] - expect).abs() < 1e-12);
        assert!((values[2] + expect).abs() < 1e-12);
        assert!((values[3] + expect).abs() < 1e-12);
        for (i, v) in values.iter().enumerate() {
            assert!((tree.predict(&[x[[i, 0]]]) - v).abs() < 1e-12);
        }
    }

    #[test]
    fn binning_thresholds_are_consistent_with_bins() {
        let x = ndarray::array![[0.0f32], [1.0], [2.0], [3.0], [10.0]];
        let edges = build_bins(x.view(), 256);
        assert_eq!(edges[0], vec![0.5, 1.5, 2.5, 6.5]);
        assert_eq!(bin_of(&edges[0], 0.0), 0);
        assert_eq!(bin_of(&edges[0], 0.5), 0); // equal goes left
        assert_eq!(bin_of(&edges[0], 0.75), 1);
        assert_eq!(bin_of(&edges[0], 10.0), 4);
    }

    #[test]
    fn quantile_binning_caps_bin_count() {
        let values: Vec<f32> = (0..1000).map(|i| i as f32).collect();
        let x = ndarray::Array2::from_shape_vec((1000, 1), values).unwrap();
        let edges = build_bins(x.view(), 16);
        assert!(edges[0].len() <= 15);
        assert!(edges[0].windows(2).all(|w| w[0] < w[1]));
    }
}
