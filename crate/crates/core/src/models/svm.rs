//! Support vector machine with an RBF kernel, trained by SMO.
//!
//! The full kernel matrix is cached, which caps practical training size at a
//! few thousand rows; larger inputs are reduced by a seeded subsample
//! (`max_rows`, default 5000). Probability output comes from Platt scaling
//! fitted on a held-out calibration fold.

use super::{sigmoid, ModelError, ModelSpec};
use crate::seed;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SvmModel {
    pub spec: ModelSpec,
    pub feature_names: Vec<String>,
    pub support_vectors: Vec<Vec<f64>>,
    /// alpha_i * y_i for each support vector, y in {-1, +1}.
    pub dual_coefficients: Vec<f64>,
    pub bias: f64,
    pub gamma: f64,
    /// Platt scaling: P(y=1|f) = sigmoid(-(a*f + b)).
    pub platt_a: f64,
    pub platt_b: f64,
}

fn rbf(a: &[f64], b: &[f64], gamma: f64) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(x, z)| (x - z) * (x - z)).sum();
    (-gamma * d).exp()
}

struct SmoResult {
    alphas: Vec<f64>,
    bias: f64,
}

/// Simplified SMO over the full Gram matrix. `y` in {-1, +1}.
fn smo(
    gram: &[f64],
    y: &[f64],
    c: f64,
    tol: f64,
    n: usize,
    seed_value: u64,
) -> SmoResult {
    let mut alphas = vec![0.0; n];
    let mut bias = 0.0;
    let mut rng = seed::rng(seed_value, "svm-smo", 0);
    let decision = |alphas: &[f64], bias: f64, i: usize| -> f64 {
        let mut f = bias;
        for j in 0..n {
            if alphas[j] != 0.0 {
                f += alphas[j] * y[j] * gram[j * n + i];
            }
        }
        f
    };
    let max_passes = 10;
    let max_sweeps = 200;
    let mut passes = 0;
    let mut sweeps = 0;
    while passes < max_passes && sweeps < max_sweeps {
        sweeps += 1;
        let mut changed = 0;
        for i in 0..n {
            let e_i = decision(&alphas, bias, i) - y[i];
            let r = e_i * y[i];
            if !((r < -tol && alphas[i] < c) || (r > tol && alphas[i] > 0.0)) {
                continue;
            }
            // Random second choice first, then a full sweep from a random
            // offset so a violator is never abandoned while progress is
            // still possible.
            let start = rng.gen_range(0..n);
            let candidates =
                std::iter::once((start + n - 1) % n).chain((0..n).map(move |k| (start + k) % n));
            for j in candidates {
                if j == i {
                    continue;
                }
                let e_j = decision(&alphas, bias, j) - y[j];
                let (a_i_old, a_j_old) = (alphas[i], alphas[j]);
                let (low, high) = if (y[i] - y[j]).abs() > 0.5 {
                    ((a_j_old - a_i_old).max(0.0), (c + a_j_old - a_i_old).min(c))
                } else {
                    ((a_i_old + a_j_old - c).max(0.0), (a_i_old + a_j_old).min(c))
                };
                if high - low < 1e-12 {
                    continue;
                }
                let eta = 2.0 * gram[i * n + j] - gram[i * n + i] - gram[j * n + j];
                if eta >= 0.0 {
                    continue;
                }
                let mut a_j = a_j_old - y[j] * (e_i - e_j) / eta;
                a_j = a_j.clamp(low, high);
                if (a_j - a_j_old).abs() < 1e-7 {
                    continue;
                }
                let a_i = a_i_old + y[i] * y[j] * (a_j_old - a_j);
                alphas[i] = a_i;
                alphas[j] = a_j;
                let b1 = bias - e_i
                    - y[i] * (a_i - a_i_old) * gram[i * n + i]
                    - y[j] * (a_j - a_j_old) * gram[i * n + j];
                let b2 = bias - e_j
                    - y[i] * (a_i - a_i_old) * gram[i * n + j]
                    - y[j] * (a_j - a_j_old) * gram[j * n + j];
                bias = if 0.0 < a_i && a_i < c {
                    b1
                } else if 0.0 < a_j && a_j < c {
                    b2
                } else {
                    0.5 * (b1 + b2)
                };
                changed += 1;
                break;
            }
        }
        if changed == 0 {
            passes += 1;
        } else {
            passes = 0;
        }
    }
    SmoResult { alphas, bias }
}

/// Platt's sigmoid fit: minimize cross-entropy of sigmoid(-(a*f + b))
/// against smoothed targets, by damped Newton iteration.
fn fit_platt(scores: &[f64], labels: &[bool]) -> (f64, f64) {
    let n_pos = labels.iter().filter(|&&y| y).count() as f64;
    let n_neg = labels.len() as f64 - n_pos;
    let t_pos = (n_pos + 1.0) / (n_pos + 2.0);
    let t_neg = 1.0 / (n_neg + 2.0);
    let targets: Vec<f64> = labels
        .iter()
        .map(|&y| if y { t_pos } else { t_neg })
        .collect();
    let mut a = 0.0;
    let mut b = ((n_neg + 1.0) / (n_pos + 1.0)).ln();
    for _ in 0..100 {
        let (mut g_a, mut g_b) = (0.0, 0.0);
        let (mut h_aa, mut h_ab, mut h_bb) = (1e-12, 0.0, 1e-12);
        for (f, t) in scores.iter().zip(&targets) {
            let p = sigmoid(-(a * f + b));
            let d = t - p; // d(loss)/d(a*f+b) with loss = CE(t, p)
            g_a += d * f;
            g_b += d;
            let w = p * (1.0 - p);
            h_aa += w * f * f;
            h_ab += w * f;
            h_bb += w;
        }
        let det = h_aa * h_bb - h_ab * h_ab;
        if det.abs() < 1e-300 {
            break;
        }
        let da = (g_a * h_bb - g_b * h_ab) / det;
        let db = (g_b * h_aa - g_a * h_ab) / det;
        a -= da;
        b -= db;
        if da.abs() < 1e-10 && db.abs() < 1e-10 {
            break;
        }
    }
    (a, b)
}

pub fn fit(
    spec: &ModelSpec,
    instances: &[Vec<f64>],
    labels: &[bool],
    feature_names: Vec<String>,
) -> Result<SvmModel, ModelError> {
    if labels.iter().all(|&y| y) || labels.iter().all(|&y| !y) {
        return Err(ModelError::SingleClassTraining);
    }
    let c = spec.f64_param("C", 1000.0)?;
    let gamma = spec.f64_param("gamma", 1.0)?;
    let tol = spec.f64_param("tol", 1e-3)?;
    let max_rows = spec.usize_param("max_rows", 5000)?.max(8);

    // Seeded subsample when past the practical row cap.
    let mut indices: Vec<usize> = (0..instances.len()).collect();
    if indices.len() > max_rows {
        let mut rng = seed::rng(spec.seed, "svm-subsample", 0);
        indices.shuffle(&mut rng);
        indices.truncate(max_rows);
        indices.sort_unstable();
    }

    // Stratified hold-out fold for Platt calibration.
    let mut pos: Vec<usize> = indices.iter().copied().filter(|&i| labels[i]).collect();
    let mut neg: Vec<usize> = indices.iter().copied().filter(|&i| !labels[i]).collect();
    let mut rng = seed::rng(spec.seed, "svm-calibration", 0);
    pos.shuffle(&mut rng);
    neg.shuffle(&mut rng);
    let pos_hold = (pos.len() / 5).max(1).min(pos.len() - 1);
    let neg_hold = (neg.len() / 5).max(1).min(neg.len() - 1);
    let holdout: Vec<usize> = pos[..pos_hold].iter().chain(&neg[..neg_hold]).copied().collect();
    let train_idx: Vec<usize> = pos[pos_hold..].iter().chain(&neg[neg_hold..]).copied().collect();

    let x: Vec<&Vec<f64>> = train_idx.iter().map(|&i| &instances[i]).collect();
    let y: Vec<f64> = train_idx
        .iter()
        .map(|&i| if labels[i] { 1.0 } else { -1.0 })
        .collect();
    let n = x.len();
    let mut gram = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let k = rbf(x[i], x[j], gamma);
            gram[i * n + j] = k;
            gram[j * n + i] = k;
        }
    }
    let result = smo(&gram, &y, c, tol, n, spec.seed);

    // Keep only support vectors.
    let mut support_vectors = Vec::new();
    let mut dual_coefficients = Vec::new();
    for i in 0..n {
        if result.alphas[i] > 1e-10 {
            support_vectors.push(x[i].clone());
            dual_coefficients.push(result.alphas[i] * y[i]);
        }
    }
    let mut model = SvmModel {
        spec: spec.clone(),
        feature_names,
        support_vectors,
        dual_coefficients,
        bias: result.bias,
        gamma,
        platt_a: -1.0,
        platt_b: 0.0,
    };
    let holdout_scores: Vec<f64> = holdout
        .iter()
        .map(|&i| model.decision(&instances[i]))
        .collect();
    let holdout_labels: Vec<bool> = holdout.iter().map(|&i| labels[i]).collect();
    let (a, b) = fit_platt(&holdout_scores, &holdout_labels);
    model.platt_a = a;
    model.platt_b = b;
    Ok(model)
}

impl SvmModel {
    /// Signed distance-like decision value; positive means at-risk.
    pub fn decision(&self, x: &[f64]) -> f64 {
        self.bias
            + self
                .support_vectors
                .iter()
                .zip(&self.dual_coefficients)
                .map(|(sv, &coef)| coef * rbf(sv, x, self.gamma))
                .sum::<f64>()
    }

    pub fn predict_proba(&self, instances: &[Vec<f64>]) -> Vec<f64> {
        instances
            .iter()
            .map(|x| sigmoid(-(self.platt_a * self.decision(x) + self.platt_b)))
            .collect()
    }
}
