//! Multinomial logistic regression: softmax, L2 penalty, full-batch Adam.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::Result;

use super::ClassifierSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    /// Row-major `n_classes x n_features`.
    pub weights: Vec<f32>,
    pub bias: Vec<f32>,
    pub n_classes: usize,
    pub n_features: usize,
}

/// In-place row softmax with the max-subtraction trick.
pub(crate) fn softmax_rows(scores: &mut Array2<f64>) {
    for mut row in scores.outer_iter_mut() {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
}

/// Train with Adam on the full batch for a fixed epoch budget.
///
/// The objective is convex, so weights start at zero and no random state is
/// involved: the optimizer trajectory is a pure function of the data.
pub fn train(
    spec: &ClassifierSpec,
    x: ArrayView2<f32>,
    y: &[usize],
    n_classes: usize,
) -> Result<LogisticModel> {
    let lr = spec.param("learning_rate");
    let l2 = spec.param("l2");
    let epochs = spec.param_usize("epochs");
    let (n, d) = (x.nrows(), x.ncols());

    let mut w = Array2::<f32>::zeros((n_classes, d));
    let mut b = Array1::<f32>::zeros(n_classes);
    let mut m_w = Array2::<f64>::zeros((n_classes, d));
    let mut v_w = Array2::<f64>::zeros((n_classes, d));
    let mut m_b = Array1::<f64>::zeros(n_classes);
    let mut v_b = Array1::<f64>::zeros(n_classes);
    let (beta1, beta2, eps) = (0.9f64, 0.999f64, 1e-8f64);

    for epoch in 0..epochs {
        // Forward: logits = X W^T + b.
        let mut scores = x.dot(&w.t()).mapv(f64::from);
        for mut row in scores.outer_iter_mut() {
            for (c, v) in row.iter_mut().enumerate() {
                *v += b[c] as f64;
            }
        }
        softmax_rows(&mut scores);
        // Residual P - Y, kept f32 for the matmul against X.
        let mut residual = scores.mapv(|v| v as f32);
        for (i, &label) in y.iter().enumerate() {
            residual[[i, label]] -= 1.0;
        }
        let scale = 1.0 / n as f32;
        let mut grad_w = residual.t().dot(&x);
        grad_w.mapv_inplace(|g| g * scale);
        grad_w.scaled_add(l2 as f32, &w);
        let grad_b = residual.sum_axis(Axis(0)).mapv(|g| g * scale);

        // Adam step with bias correction.
        let t = (epoch + 1) as i32;
        let correct1 = 1.0 - beta1.powi(t);
        let correct2 = 1.0 - beta2.powi(t);
        for (wv, (mv, (vv, g))) in w.iter_mut().zip(
            m_w.iter_mut()
                .zip(v_w.iter_mut().zip(grad_w.iter().map(|&g| g as f64))),
        ) {
            *mv = beta1 * *mv + (1.0 - beta1) * g;
            *vv = beta2 * *vv + (1.0 - beta2) * g * g;
            let step = lr * (*mv / correct1) / ((*vv / correct2).sqrt() + eps);
            *wv -= step as f32;
        }
        for (bv, (mv, (vv, g))) in b.iter_mut().zip(
            m_b.iter_mut()
                .zip(v_b.iter_mut().zip(grad_b.iter().map(|&g| g as f64))),
        ) {
            *mv = beta1 * *mv + (1.0 - beta1) * g;
            *vv = beta2 * *vv + (1.0 - beta2) * g * g;
            let step = lr * (*mv / correct1) / ((*vv / correct2).sqrt() + eps);
            *bv -= step as f32;
        }
    }

    Ok(LogisticModel {
        weights: w.into_raw_vec_and_offset().0,
        bias: b.to_vec(),
        n_classes,
        n_features: d,
    })
}

pub fn predict_proba(model: &LogisticModel, x: ArrayView2<f32>) -> Array2<f64> {
    let w = Array2::from_shape_vec(
        (model.n_classes, model.n_features),
        model.weights.clone(),
    )
    .expect("stored weight length matches its shape");
    let mut scores = x.dot(&w.t()).mapv(f64::from);
    for mut row in scores.outer_iter_mut() {
        for (c, v) in row.iter_mut().enumerate() {
            *v += model.bias[c] as f64;
        }
    }
    softmax_rows(&mut scores);
    scores
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synth::generate_blobs;
    use crate::zoo::{train as zoo_train, ClassifierId};

    #[test]
    fn fits_separable_blobs() {
        let (x, y) = generate_blobs(3, 30, 12, 3.0, 21);
        let spec = ClassifierSpec::new(ClassifierId::Lr, 0);
        let model = zoo_train(&spec, x.view(), &y).unwrap();
        let preds = model.predict(x.view()).unwrap();
        let correct = preds.iter().zip(&y).filter(|(a, b)| a == b).count();
        assert!(correct as f64 / y.len() as f64 > 0.97, "{correct}/90");
        let probs = model.predict_proba(x.view()).unwrap();
        for row in probs.outer_iter() {
            assert!((row.sum() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn training_is_deterministic() {
        let (x, y) = generate_blobs(2, 25, 6, 2.0, 3);
        let spec = ClassifierSpec::new(ClassifierId::Lr, 1);
        let a = zoo_train(&spec, x.view(), &y).unwrap();
        let b = zoo_train(&spec, x.view(), &y).unwrap();
        assert_eq!(a.state, b.state);
    }

    #[test]
    fn l2_shrinks_weights() {
        let (x, y) = generate_blobs(2, 25, 6, 3.0, 5);
        let mut weak = ClassifierSpec::new(ClassifierId::Lr, 1);
        weak.hyperparams.insert("l2".into(), 1e-6);
        let mut strong = weak.clone();
        strong.hyperparams.insert("l2".into(), 1.0);
        let norm = |spec: &ClassifierSpec| -> f64 {
            match &zoo_train(spec, x.view(), &y).unwrap().state {
                crate::zoo::ModelState::Logistic(m) => {
                    m.weights.iter().map(|&w| (w as f64) * (w as f64)).sum()
                }
                _ => unreachable!(),
            }
        };
        assert!(norm(&strong) < norm(&weak));
    }
}
