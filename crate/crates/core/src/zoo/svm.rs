//! Support vector machine: binary C-SVC solved by SMO with maximal-violating-
//! pair working sets, RBF kernel, one-vs-rest multiclass, and per-class Platt
//! sigmoid calibration fit on the training decision values.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::Result;

use super::ClassifierSpec;

/// Precompute the full kernel matrix up to this many samples; above it rows
/// are computed on demand with a bounded cache.
const FULL_MATRIX_LIMIT: usize = 8192;

/// One binary one-vs-rest problem: support vectors, their coefficients
/// (`alpha_j * y_j`), the bias, and the Platt sigmoid (a, b).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinarySvm {
    /// Row-major `n_support x n_features`.
    pub sv_features: Vec<f32>,
    pub coef: Vec<f64>,
    pub rho: f64,
    pub platt_a: f64,
    pub platt_b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    /// One problem per class, ascending class order.
    pub problems: Vec<BinarySvm>,
    pub gamma: f64,
    pub n_classes: usize,
    pub n_features: usize,
}

/// RBF kernel rows over the training set, precomputed or cached on demand.
struct KernelSource<'a> {
    x: ArrayView2<'a, f32>,
    gamma: f64,
    sq_norms: Vec<f64>,
    full: Option<Vec<f64>>,
    cache: std::collections::HashMap<usize, Vec<f64>>,
    cache_order: std::collections::VecDeque<usize>,
    cache_cap: usize,
}

impl<'a> KernelSource<'a> {
    fn new(x: ArrayView2<'a, f32>, gamma: f64) -> Self {
        let n = x.nrows();
        let sq_norms: Vec<f64> = x
            .outer_iter()
            .map(|row| row.iter().map(|&v| v as f64 * v as f64).sum())
            .collect();
        let full = if n <= FULL_MATRIX_LIMIT {
            let mut matrix = vec![0.0f64; n * n];
            // Gram products via one matmul, then the RBF transform.
            let gram = x.dot(&x.t());
            for i in 0..n {
                for j in 0..n {
                    let dist = (sq_norms[i] + sq_norms[j] - 2.0 * gram[[i, j]] as f64).max(0.0);
                    matrix[i * n + j] = (-gamma * dist).exp();
                }
            }
            Some(matrix)
        } else {
            None
        };
        // Bounded row cache for the on-demand path: ~512 MB worth of rows.
        let cache_cap = (512 * 1024 * 1024 / (8 * n.max(1))).max(2);
        KernelSource {
            x,
            gamma,
            sq_norms,
            full,
            cache: std::collections::HashMap::new(),
            cache_order: std::collections::VecDeque::new(),
            cache_cap,
        }
    }

    fn row(&mut self, i: usize) -> &[f64] {
        let n = self.x.nrows();
        if let Some(full) = &self.full {
            return &full[i * n..(i + 1) * n];
        }
        if !self.cache.contains_key(&i) {
            let products = self.x.dot(&self.x.row(i));
            let row: Vec<f64> = (0..n)
                .map(|j| {
                    let dist =
                        (self.sq_norms[i] + self.sq_norms[j] - 2.0 * products[j] as f64).max(0.0);
                    (-self.gamma * dist).exp()
                })
                .collect();
            if self.cache.len() >= self.cache_cap {
                if let Some(evict) = self.cache_order.pop_front() {
                    self.cache.remove(&evict);
                }
            }
            self.cache.insert(i, row);
            self.cache_order.push_back(i);
        }
        self.cache.get(&i).expect("row was just inserted")
    }
}

/// Solve one binary problem. `y` holds +1.0 / -1.0.
///
/// Returns `(alpha, rho, decision_values)` where the decision value of
/// training sample `i` is `sum_j alpha_j y_j K(i, j) - rho`.
fn smo(
    kernel: &mut KernelSource<'_>,
    y: &[f64],
    c: f64,
    tolerance: f64,
) -> (Vec<f64>, f64, Vec<f64>) {
    let n = y.len();
    let tau = 1e-12;
    let mut alpha = vec![0.0f64; n];
    // Gradient of the dual objective: G_i = sum_j Q_ij alpha_j - 1.
    let mut g = vec![-1.0f64; n];
    let max_iter = (200 * n).max(10_000);

    for iteration in 0..max_iter {
        // Maximal violating pair over I_up and I_low.
        let mut i_sel = usize::MAX;
        let mut m_val = f64::NEG_INFINITY;
        let mut j_sel = usize::MAX;
        let mut big_m_val = f64::INFINITY;
        for t in 0..n {
            let in_up = (y[t] > 0.0 && alpha[t] < c) || (y[t] < 0.0 && alpha[t] > 0.0);
            let in_low = (y[t] > 0.0 && alpha[t] > 0.0) || (y[t] < 0.0 && alpha[t] < c);
            let score = -y[t] * g[t];
            if in_up && score > m_val {
                m_val = score;
                i_sel = t;
            }
            if in_low && score < big_m_val {
                big_m_val = score;
                j_sel = t;
            }
        }
        if i_sel == usize::MAX || j_sel == usize::MAX || m_val - big_m_val < tolerance {
            break;
        }
        if iteration + 1 == max_iter {
            log::warn!("smo hit the iteration cap before reaching tolerance {tolerance}");
        }

        let (i, j) = (i_sel, j_sel);
        let k_i = kernel.row(i).to_vec();
        let k_j = kernel.row(j).to_vec();
        let old_ai = alpha[i];
        let old_aj = alpha[j];

        // Two-variable analytic step with box clipping. The curvature is
        // K_ii + K_jj - 2 K_ij in both branches; only the direction differs.
        if y[i] != y[j] {
            let quad = (k_i[i] + k_j[j] - 2.0 * k_i[j]).max(tau);
            let delta = (-g[i] - g[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let quad = (k_i[i] + k_j[j] - 2.0 * k_i[j]).max(tau);
            let delta = (g[i] - g[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }

        let delta_i = alpha[i] - old_ai;
        let delta_j = alpha[j] - old_aj;
        if delta_i == 0.0 && delta_j == 0.0 {
            break;
        }
        for t in 0..n {
            g[t] += y[t] * (y[i] * k_i[t] * delta_i + y[j] * k_j[t] * delta_j);
        }
    }

    // Bias from the KKT conditions: average y*G over free vectors, else the
    // midpoint of the feasible interval.
    let mut n_free = 0usize;
    let mut sum_free = 0.0f64;
    let mut upper = f64::INFINITY;
    let mut lower = f64::NEG_INFINITY;
    for t in 0..y.len() {
        let yg = y[t] * g[t];
        if alpha[t] >= c {
            if y[t] < 0.0 {
                upper = upper.min(yg);
            } else {
                lower = lower.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                upper = upper.min(yg);
            } else {
                lower = lower.max(yg);
            }
        } else {
            n_free += 1;
            sum_free += yg;
        }
    }
    let rho = if n_free > 0 {
        sum_free / n_free as f64
    } else {
        (upper + lower) / 2.0
    };

    // Decision values over the training set, from support vectors only.
    let mut decision = vec![-rho; n];
    for j in 0..n {
        if alpha[j] > 0.0 {
            let row = kernel.row(j);
            let coef = alpha[j] * y[j];
            for t in 0..n {
                decision[t] += coef * row[t];
            }
        }
    }
    (alpha, rho, decision)
}

/// Fit Platt's sigmoid `P(y=1|f) = 1 / (1 + exp(a f + b))` by regularized
/// maximum likelihood (Newton with backtracking).
fn fit_platt(decision: &[f64], positive: &[bool]) -> (f64, f64) {
    let prior1 = positive.iter().filter(|&&p| p).count() as f64;
    let prior0 = positive.len() as f64 - prior1;
    let hi_target = (prior1 + 1.0) / (prior1 + 2.0);
    let lo_target = 1.0 / (prior0 + 2.0);
    let targets: Vec<f64> = positive
        .iter()
        .map(|&p| if p { hi_target } else { lo_target })
        .collect();

    let objective = |a: f64, b: f64| -> f64 {
        decision
            .iter()
            .zip(&targets)
            .map(|(&f, &t)| {
                let f_ab = a * f + b;
                if f_ab >= 0.0 {
                    t * f_ab + (1.0 + (-f_ab).exp()).ln()
                } else {
                    (t - 1.0) * f_ab + (1.0 + f_ab.exp()).ln()
                }
            })
            .sum()
    };

    let sigma = 1e-12;
    let mut a = 0.0f64;
    let mut b = ((prior0 + 1.0) / (prior1 + 1.0)).ln();
    let mut fval = objective(a, b);
    for _ in 0..100 {
        let mut h11 = sigma;
        let mut h22 = sigma;
        let mut h21 = 0.0;
        let mut g1 = 0.0;
        let mut g2 = 0.0;
        for (&f, &t) in decision.iter().zip(&targets) {
            let f_ab = a * f + b;
            let (p, q) = if f_ab >= 0.0 {
                let e = (-f_ab).exp();
                (e / (1.0 + e), 1.0 / (1.0 + e))
            } else {
                let e = f_ab.exp();
                (1.0 / (1.0 + e), e / (1.0 + e))
            };
            let d2 = p * q;
            h11 += f * f * d2;
            h22 += d2;
            h21 += f * d2;
            let d1 = t - p;
            g1 += f * d1;
            g2 += d1;
        }
        if g1.abs() < 1e-5 && g2.abs() < 1e-5 {
            break;
        }
        let det = h11 * h22 - h21 * h21;
        let da = -(h22 * g1 - h21 * g2) / det;
        let db = -(-h21 * g1 + h11 * g2) / det;
        let gd = g1 * da + g2 * db;
        let mut step = 1.0f64;
        let mut stepped = false;
        while step >= 1e-10 {
            let new_a = a + step * da;
            let new_b = b + step * db;
            let new_f = objective(new_a, new_b);
            if new_f < fval + 1e-4 * step * gd {
                a = new_a;
                b = new_b;
                fval = new_f;
                stepped = true;
                break;
            }
            step /= 2.0;
        }
        if !stepped {
            break;
        }
    }
    (a, b)
}

fn stable_sigmoid(f_ab: f64) -> f64 {
    if f_ab >= 0.0 {
        let e = (-f_ab).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + f_ab.exp())
    }
}

pub fn train(
    spec: &ClassifierSpec,
    x: ArrayView2<f32>,
    y: &[usize],
    n_classes: usize,
) -> Result<SvmModel> {
    let c = spec.param("c");
    let tolerance = spec.param("tolerance");
    let gamma = match spec.param("gamma") {
        g if g > 0.0 => g,
        _ => {
            // "scale": 1 / (d * variance of all feature entries).
            let n_entries = (x.nrows() * x.ncols()) as f64;
            let mean = x.iter().map(|&v| v as f64).sum::<f64>() / n_entries;
            let var = x
                .iter()
                .map(|&v| {
                    let d = v as f64 - mean;
                    d * d
                })
                .sum::<f64>()
                / n_entries;
            if var > 0.0 {
                1.0 / (x.ncols() as f64 * var)
            } else {
                1.0 / x.ncols() as f64
            }
        }
    };

    let mut kernel = KernelSource::new(x, gamma);
    let mut problems = Vec::with_capacity(n_classes);
    for class in 0..n_classes {
        let labels: Vec<f64> = y
            .iter()
            .map(|&l| if l == class { 1.0 } else { -1.0 })
            .collect();
        let (alpha, rho, decision) = smo(&mut kernel, &labels, c, tolerance);
        let positive: Vec<bool> = y.iter().map(|&l| l == class).collect();
        let (platt_a, platt_b) = fit_platt(&decision, &positive);

        let mut sv_features = Vec::new();
        let mut coef = Vec::new();
        for (idx, &a) in alpha.iter().enumerate() {
            if a > 0.0 {
                sv_features.extend(x.row(idx).iter().copied());
                coef.push(a * labels[idx]);
            }
        }
        problems.push(BinarySvm {
            sv_features,
            coef,
            rho,
            platt_a,
            platt_b,
        });
    }
    Ok(SvmModel {
        problems,
        gamma,
        n_classes,
        n_features: x.ncols(),
    })
}

fn decision_value(problem: &BinarySvm, gamma: f64, n_features: usize, row: ArrayView1<f32>) -> f64 {
    let row_sq: f64 = row.iter().map(|&v| v as f64 * v as f64).sum();
    let mut f = -problem.rho;
    for (j, &coef) in problem.coef.iter().enumerate() {
        let sv = &problem.sv_features[j * n_features..(j + 1) * n_features];
        let mut dot = 0.0f64;
        let mut sv_sq = 0.0f64;
        for (a, &b) in row.iter().zip(sv) {
            dot += *a as f64 * b as f64;
            sv_sq += b as f64 * b as f64;
        }
        let dist = (row_sq + sv_sq - 2.0 * dot).max(0.0);
        f += coef * (-gamma * dist).exp();
    }
    f
}

/// Per-class Platt probabilities, normalized to sum to one.
pub fn predict_proba(model: &SvmModel, x: ArrayView2<f32>) -> Array2<f64> {
    let mut out = Array2::<f64>::zeros((x.nrows(), model.n_classes));
    for (i, row) in x.outer_iter().enumerate() {
        let mut raw = Array1::<f64>::zeros(model.n_classes);
        for (k, problem) in model.problems.iter().enumerate() {
            let f = decision_value(problem, model.gamma, model.n_features, row);
            raw[k] = stable_sigmoid(problem.platt_a * f + problem.platt_b);
        }
        let sum = raw.sum();
        if sum > 0.0 {
            for k in 0..model.n_classes {
                out[[i, k]] = raw[k] / sum;
            }
        } else {
            // All sigmoids underflowed; fall back to uniform.
            for k in 0..model.n_classes {
                out[[i, k]] = 1.0 / model.n_classes as f64;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synth::generate_blobs;
    use crate::zoo::{train as zoo_train, ClassifierId, ModelState};

    #[test]
    fn fits_separable_blobs_multiclass() {
        let (x, y) = generate_blobs(3, 30, 10, 3.0, 41);
        let spec = ClassifierSpec::new(ClassifierId::Svm, 0);
        let model = zoo_train(&spec, x.view(), &y).unwrap();
        let preds = model.predict(x.view()).unwrap();
        let correct = preds.iter().zip(&y).filter(|(a, b)| a == b).count();
        assert!(correct as f64 / y.len() as f64 > 0.95, "{correct}/90");
        let probs = model.predict_proba(x.view()).unwrap();
        for row in probs.outer_iter() {
            assert!((row.sum() - 1.0).abs() < 1e-9);
            assert!(row.iter().all(|&p| p >= 0.0));
        }
    }

    #[test]
    fn binary_margin_signs_match_labels() {
        let (x, y) = generate_blobs(2, 25, 6, 4.0, 42);
        let spec = ClassifierSpec::new(ClassifierId::Svm, 0);
        let model = zoo_train(&spec, x.view(), &y).unwrap();
        let ModelState::Svm(svm) = &model.state else {
            panic!("wrong state kind");
        };
        // Problem 0 treats class 0 as positive: decision values should be
        // positive for class 0 and negative for class 1 on separable data.
        let mut correct = 0;
        for i in 0..x.nrows() {
            let f = decision_value(&svm.problems[0], svm.gamma, 6, x.row(i));
            if (f > 0.0) == (y[i] == 0) {
                correct += 1;
            }
        }
        assert!(correct >= 48, "{correct}/50 margins on the right side");
    }

    #[test]
    fn training_is_deterministic() {
        let (x, y) = generate_blobs(2, 20, 8, 3.0, 8);
        let spec = ClassifierSpec::new(ClassifierId::Svm, 0);
        let a = zoo_train(&spec, x.view(), &y).unwrap();
        let b = zoo_train(&spec, x.view(), &y).unwrap();
        assert_eq!(a.state, b.state);
    }

    #[test]
    fn explicit_gamma_is_used_verbatim() {
        let (x, y) = generate_blobs(2, 15, 4, 3.0, 8);
        let mut spec = ClassifierSpec::new(ClassifierId::Svm, 0);
        spec.hyperparams.insert("gamma".into(), 0.25);
        let model = zoo_train(&spec, x.view(), &y).unwrap();
        let ModelState::Svm(svm) = &model.state else {
            panic!("wrong state kind");
        };
        assert_eq!(svm.gamma, 0.25);
    }

    #[test]
    fn platt_sigmoid_is_monotone_in_the_margin() {
        let decision = vec![-2.0, -1.0, -0.5, 0.5, 1.0, 2.0];
        let positive = vec![false, false, false, true, true, true];
        let (a, b) = fit_platt(&decision, &positive);
        let p = |f: f64| stable_sigmoid(a * f + b);
        assert!(p(2.0) > p(0.0));
        assert!(p(0.0) > p(-2.0));
        assert!(p(2.0) > 0.5);
        assert!(p(-2.0) < 0.5);
    }
}
