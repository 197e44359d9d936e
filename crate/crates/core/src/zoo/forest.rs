//! Random forest: bagged CART trees over random feature subsets.

use ndarray::{Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::util::derive_seed;

use super::tree::{grow, DecisionTree, TreeParams};
use super::ClassifierSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<DecisionTree>,
    pub n_classes: usize,
}

/// Train a forest: each tree gets its own seeded stream for the bootstrap and
/// feature sampling, so tree `t` is identical no matter how the pool schedules
/// it or how many trees exist.
pub fn train(
    spec: &ClassifierSpec,
    x: ArrayView2<f32>,
    y: &[usize],
    n_classes: usize,
) -> Result<ForestModel> {
    let n_trees = spec.param_usize("n_trees");
    let params = TreeParams {
        max_depth: spec.param_usize("max_depth"),
        min_samples_leaf: spec.param_usize("min_samples_leaf"),
        // ceil(sqrt(d)) features per split, the usual classification default.
        feature_sample: (x.ncols() as f64).sqrt().ceil() as usize,
    };
    let n = x.nrows();
    let trees: Vec<DecisionTree> = (0..n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng =
                ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, &format!("rf-tree/{t}")));
            let bootstrap: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
            grow(x, y, n_classes, &bootstrap, params, &mut rng)
        })
        .collect();
    Ok(ForestModel { trees, n_classes })
}

/// Mean of the per-tree leaf distributions. Summing first and dividing once
/// keeps every entry in [0, 1] exactly; accumulating pre-scaled terms can
/// round just past 1.
pub fn predict_proba(model: &ForestModel, x: ArrayView2<f32>) -> Array2<f64> {
    let mut out = Array2::<f64>::zeros((x.nrows(), model.n_classes));
    let mut row_buf = vec![0.0f32; x.ncols()];
    for (i, row) in x.outer_iter().enumerate() {
        for (dst, src) in row_buf.iter_mut().zip(row.iter()) {
            *dst = *src;
        }
        for tree in &model.trees {
            let dist = tree.predict_dist(&row_buf);
            for (c, &p) in dist.iter().enumerate() {
                out[[i, c]] += p;
            }
        }
    }
    let count = model.trees.len() as f64;
    out.mapv_inplace(|v| v / count);
    out
}
