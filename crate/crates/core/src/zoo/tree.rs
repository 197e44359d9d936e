//! CART decision trees with Gini impurity, the building block of the forest.

use ndarray::ArrayView2;
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Split {
        feature: u32,
        threshold: f32,
        left: u32,
        right: u32,
    },
    Leaf {
        /// Class distribution of the training samples that reached the leaf.
        dist: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub nodes: Vec<Node>,
}

#[derive(Debug, Clone, Copy)]
pub struct TreeParams {
    /// 0 means unlimited.
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    /// Features sampled (without replacement) per split.
    pub feature_sample: usize,
}

struct Builder<'a, R: Rng> {
    x: ArrayView2<'a, f32>,
    y: &'a [usize],
    n_classes: usize,
    params: TreeParams,
    rng: &'a mut R,
    nodes: Vec<Node>,
}

fn gini(counts: &[u64], total: u64) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let t = total as f64;
    1.0 - counts
        .iter()
        .map(|&c| {
            let p = c as f64 / t;
            p * p
        })
        .sum::<f64>()
}

impl<R: Rng> Builder<'_, R> {
    fn leaf(&mut self, indices: &[usize]) -> u32 {
        let mut counts = vec![0u64; self.n_classes];
        for &i in indices {
            counts[self.y[i]] += 1;
        }
        let total = indices.len() as f64;
        let dist = counts.iter().map(|&c| c as f64 / total).collect();
        self.nodes.push(Node::Leaf { dist });
        (self.nodes.len() - 1) as u32
    }

    /// Best split among a random feature subset: lowest weighted Gini, ties
    /// to the lowest feature index, then the lowest threshold.
    fn best_split(&mut self, indices: &[usize]) -> Option<(u32, f32, f64)> {
        let d = self.x.ncols();
        let mut sampled = rand::seq::index::sample(self.rng, d, self.params.feature_sample.min(d))
            .into_vec();
        // Sorted so tie-breaks do not depend on the sampling order.
        sampled.sort_unstable();

        let n = indices.len();
        let mut total_counts = vec![0u64; self.n_classes];
        for &i in indices {
            total_counts[self.y[i]] += 1;
        }
        let parent_gini = gini(&total_counts, n as u64);

        let mut best: Option<(u32, f32, f64)> = None;
        let mut column: Vec<(f32, usize)> = Vec::with_capacity(n);
        for f in sampled {
            column.clear();
            for &i in indices {
                column.push((self.x[[i, f]], self.y[i]));
            }
            column.sort_unstable_by(|a, b| a.0.partial_cmp(&b.0).expect("finite features"));

            let mut left_counts = vec![0u64; self.n_classes];
            let mut left_n = 0u64;
            for split_at in 1..n {
                let (prev_value, prev_label) = column[split_at - 1];
                left_counts[prev_label] += 1;
                left_n += 1;
                let value = column[split_at].0;
                if value <= prev_value {
                    continue;
                }
                let right_n = (n as u64) - left_n;
                if (left_n as usize) < self.params.min_samples_leaf
                    || (right_n as usize) < self.params.min_samples_leaf
                {
                    continue;
                }
                let mut right_counts = vec![0u64; self.n_classes];
                for c in 0..self.n_classes {
                    right_counts[c] = total_counts[c] - left_counts[c];
                }
                let weighted = (left_n as f64 * gini(&left_counts, left_n)
                    + right_n as f64 * gini(&right_counts, right_n))
                    / n as f64;
                if weighted >= parent_gini {
                    continue;
                }
                let threshold = (prev_value + value) / 2.0;
                let candidate = (f as u32, threshold, weighted);
                best = match best {
                    None => Some(candidate),
                    Some(current) => {
                        // Strictly better impurity wins; exact ties fall back
                        // to feature then threshold order.
                        if weighted < current.2
                            || (weighted == current.2
                                && (candidate.0, threshold) < (current.0, current.1))
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

    fn build(&mut self, indices: &[usize], depth: usize) -> u32 {
        let first_label = self.y[indices[0]];
        let pure = indices.iter().all(|&i| self.y[i] == first_label);
        let depth_capped = self.params.max_depth > 0 && depth >= self.params.max_depth;
        if pure || depth_capped || indices.len() < 2 * self.params.min_samples_leaf {
            return self.leaf(indices);
        }
        let Some((feature, threshold, _)) = self.best_split(indices) else {
            return self.leaf(indices);
        };
        let (left_idx, right_idx): (Vec<usize>, Vec<usize>) = indices
            .iter()
            .partition(|&&i| self.x[[i, feature as usize]] <= threshold);
        // Reserve the slot so child ids are known before recursion.
        self.nodes.push(Node::Leaf { dist: Vec::new() });
        let slot = (self.nodes.len() - 1) as u32;
        let left = self.build(&left_idx, depth + 1);
        let right = self.build(&right_idx, depth + 1);
        self.nodes[slot as usize] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        slot
    }
}

/// Grow a tree on `indices` (duplicates allowed, e.g. a bootstrap sample).
pub fn grow<R: Rng>(
    x: ArrayView2<f32>,
    y: &[usize],
    n_classes: usize,
    indices: &[usize],
    params: TreeParams,
    rng: &mut R,
) -> DecisionTree {
    assert!(!indices.is_empty(), "cannot grow a tree on zero samples");
    let mut builder = Builder {
        x,
        y,
        n_classes,
        params,
        rng,
        nodes: Vec::new(),
    };
    let root = builder.build(indices, 0);
    // The root's slot is pushed before any child, so it is always node 0.
    debug_assert_eq!(root, 0);
    DecisionTree {
        nodes: builder.nodes,
    }
}

impl DecisionTree {
    /// Class distribution of the leaf `row` falls into.
    pub fn predict_dist(&self, row: &[f32]) -> &[f64] {
        let mut at = 0usize;
        loop {
            match &self.nodes[at] {
                Node::Leaf { dist } => return dist,
                Node::Split {
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

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn params() -> TreeParams {
        TreeParams {
            max_depth: 0,
            min_samples_leaf: 1,
            feature_sample: 2,
        }
    }

    #[test]
    fn separable_data_is_fit_exactly() {
        let x = array![[0.0f32, 0.1], [0.2, 0.0], [1.0, 0.9], [0.9, 1.0]];
        let y = vec![0usize, 0, 1, 1];
        let indices: Vec<usize> = (0..4).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let tree = grow(x.view(), &y, 2, &indices, params(), &mut rng);
        for i in 0..4 {
            let row: Vec<f32> = x.row(i).to_vec();
            let dist = tree.predict_dist(&row);
            assert_eq!(dist[y[i]], 1.0, "sample {i} dist {dist:?}");
        }
    }

    #[test]
    fn pure_node_becomes_single_leaf() {
        let x = array![[0.0f32, 1.0], [5.0, 2.0], [3.0, 4.0]];
        let y = vec![1usize, 1, 1];
        let indices: Vec<usize> = (0..3).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let tree = grow(x.view(), &y, 2, &indices, params(), &mut rng);
        assert_eq!(tree.nodes.len(), 1);
        assert_eq!(tree.predict_dist(&[9.0, 9.0]), &[0.0, 1.0]);
    }

    #[test]
    fn max_depth_limits_growth() {
        let x = array![[0.0f32], [1.0], [2.0], [3.0]];
        let y = vec![0usize, 1, 0, 1];
        let indices: Vec<usize> = (0..4).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let shallow = grow(
            x.view(),
            &y,
            2,
            &indices,
            TreeParams {
                max_depth: 1,
                min_samples_leaf: 1,
                feature_sample: 1,
            },
            &mut rng,
        );
        // Depth 1: a root split and two leaves at most.
        assert!(shallow.nodes.len() <= 3);
    }

    #[test]
    fn duplicate_feature_values_never_split() {
        let x = array![[1.0f32], [1.0], [1.0], [1.0]];
        let y = vec![0usize, 1, 0, 1];
        let indices: Vec<usize> = (0..4).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let tree = grow(x.view(), &y, 2, &indices, params(), &mut rng);
        assert_eq!(tree.nodes.len(), 1);
        assert_eq!(tree.predict_dist(&[1.0]), &[0.5, 0.5]);
    }

    #[test]
    fn growth_is_deterministic_per_seed() {
        let (x, y01) = crate::data::synth::generate_blobs(3, 20, 6, 3.0, 7);
        let y: Vec<usize> = y01.iter().map(|&c| c as usize).collect();
        let indices: Vec<usize> = (0..60).collect();
        let grow_with = |seed: u64| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            grow(
                x.view(),
                &y,
                3,
                &indices,
                TreeParams {
                    max_depth: 0,
                    min_samples_leaf: 1,
                    feature_sample: 3,
                },
                &mut rng,
            )
        };
        assert_eq!(grow_with(5), grow_with(5));
        assert_ne!(grow_with(5), grow_with(6));
    }
}
