//! One-hidden-layer perceptron: ReLU hidden units, softmax output, Adam on
//! shuffled minibatches.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::util::{derive_seed, standard_normal};

use super::logistic::softmax_rows;
use super::ClassifierSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    /// `n_features x hidden`, row-major.
    pub w1: Vec<f32>,
    pub b1: Vec<f32>,
    /// `hidden x n_classes`, row-major.
    pub w2: Vec<f32>,
    pub b2: Vec<f32>,
    pub hidden: usize,
    pub n_classes: usize,
    pub n_features: usize,
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    beta1: f64,
    beta2: f64,
    eps: f64,
    lr: f64,
    t: i32,
}

impl Adam {
    fn new(len: usize, lr: f64) -> Adam {
        Adam {
            m: vec![0.0; len],
            v: vec![0.0; len],
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            lr,
            t: 0,
        }
    }

    /// One step over a parameter slice; `t` is advanced by the caller once
    /// per optimizer step via [`Adam::tick`].
    fn update(&mut self, params: &mut [f32], grads: &[f32]) {
        let correct1 = 1.0 - self.beta1.powi(self.t);
        let correct2 = 1.0 - self.beta2.powi(self.t);
        for (i, (p, &g)) in params.iter_mut().zip(grads).enumerate() {
            let g = g as f64;
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let step =
                self.lr * (self.m[i] / correct1) / ((self.v[i] / correct2).sqrt() + self.eps);
            *p -= step as f32;
        }
    }

    fn tick(&mut self) {
        self.t += 1;
    }
}

/// Train the network. He-initialized weights and the per-epoch shuffles come
/// from streams derived from the spec seed, so the result is reproducible.
pub fn train(
    spec: &ClassifierSpec,
    x: ArrayView2<f32>,
    y: &[usize],
    n_classes: usize,
) -> Result<MlpModel> {
    let hidden = spec.param_usize("hidden");
    let lr = spec.param("learning_rate");
    let l2 = spec.param("l2") as f32;
    let epochs = spec.param_usize("epochs");
    let batch_size = spec.param_usize("batch_size");
    let (n, d) = (x.nrows(), x.ncols());

    let mut init_rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, "mlp-init"));
    let he = |fan_in: usize, rng: &mut ChaCha8Rng| -> f32 {
        (standard_normal(rng) * (2.0 / fan_in as f64).sqrt()) as f32
    };
    let mut w1 = Array2::<f32>::zeros((d, hidden));
    w1.mapv_inplace(|_| he(d, &mut init_rng));
    let mut b1 = Array1::<f32>::zeros(hidden);
    let mut w2 = Array2::<f32>::zeros((hidden, n_classes));
    w2.mapv_inplace(|_| he(hidden, &mut init_rng));
    let mut b2 = Array1::<f32>::zeros(n_classes);

    let mut adam_w1 = Adam::new(d * hidden, lr);
    let mut adam_b1 = Adam::new(hidden, lr);
    let mut adam_w2 = Adam::new(hidden * n_classes, lr);
    let mut adam_b2 = Adam::new(n_classes, lr);

    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, "mlp-shuffle"));
    let mut order: Vec<usize> = (0..n).collect();

    for _epoch in 0..epochs {
        order.shuffle(&mut shuffle_rng);
        for batch in order.chunks(batch_size.min(n)) {
            let bn = batch.len();
            let mut xb = Array2::<f32>::zeros((bn, d));
            for (r, &i) in batch.iter().enumerate() {
                xb.row_mut(r).assign(&x.row(i));
            }
            // Forward.
            let mut z1 = xb.dot(&w1);
            for mut row in z1.outer_iter_mut() {
                for (j, v) in row.iter_mut().enumerate() {
                    *v += b1[j];
                }
            }
            let a1 = z1.mapv(|v| v.max(0.0));
            let mut scores = a1.dot(&w2).mapv(f64::from);
            for mut row in scores.outer_iter_mut() {
                for (c, v) in row.iter_mut().enumerate() {
                    *v += b2[c] as f64;
                }
            }
            softmax_rows(&mut scores);
            // Backward: delta2 = (P - Y) / bn.
            let mut delta2 = scores.mapv(|v| v as f32);
            for (r, &i) in batch.iter().enumerate() {
                delta2[[r, y[i]]] -= 1.0;
            }
            delta2.mapv_inplace(|v| v / bn as f32);

            let mut grad_w2 = a1.t().dot(&delta2);
            grad_w2.scaled_add(l2, &w2);
            let grad_b2 = delta2.sum_axis(Axis(0));

            let mut delta1 = delta2.dot(&w2.t());
            // ReLU gate.
            ndarray::Zip::from(&mut delta1).and(&z1).for_each(|d, &z| {
                if z <= 0.0 {
                    *d = 0.0;
                }
            });
            let mut grad_w1 = xb.t().dot(&delta1);
            grad_w1.scaled_add(l2, &w1);
            let grad_b1 = delta1.sum_axis(Axis(0));

            adam_w1.tick();
            adam_b1.tick();
            adam_w2.tick();
            adam_b2.tick();
            adam_w1.update(
                w1.as_slice_mut().expect("w1 contiguous"),
                grad_w1.as_slice().expect("grad contiguous"),
            );
            adam_b1.update(
                b1.as_slice_mut().expect("b1 contiguous"),
                grad_b1.as_slice().expect("grad contiguous"),
            );
            adam_w2.update(
                w2.as_slice_mut().expect("w2 contiguous"),
                grad_w2.as_slice().expect("grad contiguous"),
            );
            adam_b2.update(
                b2.as_slice_mut().expect("b2 contiguous"),
                grad_b2.as_slice().expect("grad contiguous"),
            );
        }
    }

    Ok(MlpModel {
        w1: w1.into_raw_vec_and_offset().0,
        b1: b1.to_vec(),
        w2: w2.into_raw_vec_and_offset().0,
        b2: b2.to_vec(),
        hidden,
        n_classes,
        n_features: d,
    })
}

pub fn predict_proba(model: &MlpModel, x: ArrayView2<f32>) -> Array2<f64> {
    let w1 = Array2::from_shape_vec((model.n_features, model.hidden), model.w1.clone())
        .expect("stored w1 length matches its shape");
    let w2 = Array2::from_shape_vec((model.hidden, model.n_classes), model.w2.clone())
        .expect("stored w2 length matches its shape");
    let mut z1 = x.dot(&w1);
    for mut row in z1.outer_iter_mut() {
        for (j, v) in row.iter_mut().enumerate() {
            *v += model.b1[j];
        }
    }
    z1.mapv_inplace(|v| v.max(0.0));
    let mut scores = z1.dot(&w2).mapv(f64::from);
    for mut row in scores.outer_iter_mut() {
        for (c, v) in row.iter_mut().enumerate() {
            *v += model.b2[c] as f64;
        }
    }
    softmax_rows(&mut scores);
    scores
}
