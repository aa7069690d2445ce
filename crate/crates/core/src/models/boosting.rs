//! Gradient boosting in the XGBoost style: Newton boosting on logistic
//! loss with regression trees.
//!
//! Per round, gradients g = p − y and Hessians h = p(1 − p) drive greedy
//! tree growth; split gain is ½[G_L²/(H_L+λ) + G_R²/(H_R+λ) − G²/(H+λ)] − γ
//! and each leaf outputs −G/(H+λ). The model starts from the logit prior of
//! the training labels.

use super::{sigmoid, ModelError, ModelSpec};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum RegNode {
    Leaf {
        weight: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: Box<RegNode>,
        right: Box<RegNode>,
    },
}

impl RegNode {
    fn predict(&self, x: &[f64]) -> f64 {
        match self {
            RegNode::Leaf { weight } => *weight,
            RegNode::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                if x[*feature] <= *threshold {
                    left.predict(x)
                } else {
                    right.predict(x)
                }
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoostingModel {
    pub spec: ModelSpec,
    pub feature_names: Vec<String>,
    /// Initial raw score: log(p / (1 - p)) of the training prevalence.
    pub base_score: f64,
    pub learning_rate: f64,
    pub trees: Vec<RegNode>,
}

struct GainSplit {
    feature: usize,
    threshold: f64,
    gain: f64,
}

fn best_split(
    x: &[Vec<f64>],
    g: &[f64],
    h: &[f64],
    indices: &[usize],
    lambda: f64,
    gamma: f64,
) -> Option<GainSplit> {
    let d = x[0].len();
    let g_total: f64 = indices.iter().map(|&i| g[i]).sum();
    let h_total: f64 = indices.iter().map(|&i| h[i]).sum();
    let parent_score = g_total * g_total / (h_total + lambda);
    let mut best: Option<GainSplit> = None;
    for feature in 0..d {
        let mut order: Vec<usize> = indices.to_vec();
        order.sort_by(|&a, &b| x[a][feature].partial_cmp(&x[b][feature]).unwrap());
        let mut g_left = 0.0;
        let mut h_left = 0.0;
        let mut i = 0;
        while i < order.len() {
            let value = x[order[i]][feature];
            while i < order.len() && x[order[i]][feature] == value {
                g_left += g[order[i]];
                h_left += h[order[i]];
                i += 1;
            }
            if i == order.len() {
                break;
            }
            let threshold = 0.5 * (value + x[order[i]][feature]);
            let g_right = g_total - g_left;
            let h_right = h_total - h_left;
            let gain = 0.5
                * (g_left * g_left / (h_left + lambda) + g_right * g_right / (h_right + lambda)
                    - parent_score)
                - gamma;
            if gain > 1e-12 && best.as_ref().map_or(true, |b| gain > b.gain + 1e-15) {
                best = Some(GainSplit {
                    feature,
                    threshold,
                    gain,
                });
            }
        }
    }
    best
}

fn grow(
    x: &[Vec<f64>],
    g: &[f64],
    h: &[f64],
    indices: &[usize],
    depth: usize,
    max_depth: usize,
    lambda: f64,
    gamma: f64,
) -> RegNode {
    let leaf = || {
        let g_sum: f64 = indices.iter().map(|&i| g[i]).sum();
        let h_sum: f64 = indices.iter().map(|&i| h[i]).sum();
        RegNode::Leaf {
            weight: -g_sum / (h_sum + lambda),
        }
    };
    if depth >= max_depth || indices.len() < 2 {
        return leaf();
    }
    match best_split(x, g, h, indices, lambda, gamma) {
        None => leaf(),
        Some(split) => {
            let (left_idx, right_idx): (Vec<usize>, Vec<usize>) = indices
                .iter()
                .copied()
                .partition(|&i| x[i][split.feature] <= split.threshold);
            RegNode::Split {
                feature: split.feature,
                threshold: split.threshold,
                left: Box::new(grow(
                    x, g, h, &left_idx, depth + 1, max_depth, lambda, gamma,
                )),
                right: Box::new(grow(
                    x, g, h, &right_idx, depth + 1, max_depth, lambda, gamma,
                )),
            }
        }
    }
}

pub fn fit(
    spec: &ModelSpec,
    instances: &[Vec<f64>],
    labels: &[bool],
    feature_names: Vec<String>,
) -> Result<BoostingModel, ModelError> {
    let pos = labels.iter().filter(|&&y| y).count();
    if pos == 0 || pos == labels.len() {
        return Err(ModelError::SingleClassTraining);
    }
    let learning_rate = spec.f64_param("learning_rate", 0.1)?;
    let max_depth = spec.usize_param("max_depth", 6)?.max(1);
    let n_rounds = spec.usize_param("n_estimators", 100)?;
    let lambda = spec.f64_param("reg_lambda", 1.0)?;
    let gamma = spec.f64_param("gamma", 0.0)?;

    let prior = pos as f64 / labels.len() as f64;
    let base_score = (prior / (1.0 - prior)).ln();
    let mut raw = vec![base_score; instances.len()];
    let all: Vec<usize> = (0..instances.len()).collect();
    let mut trees = Vec::with_capacity(n_rounds);
    for _ in 0..n_rounds {
        let mut g = vec![0.0; instances.len()];
        let mut h = vec![0.0; instances.len()];
        for i in 0..instances.len() {
            let p = sigmoid(raw[i]);
            g[i] = p - if labels[i] { 1.0 } else { 0.0 };
            h[i] = (p * (1.0 - p)).max(1e-16);
        }
        let tree = grow(instances, &g, &h, &all, 0, max_depth, lambda, gamma);
        if matches!(tree, RegNode::Leaf { weight } if weight.abs() < 1e-15) {
            break; // nothing left to fit
        }
        for (i, x) in instances.iter().enumerate() {
            raw[i] += learning_rate * tree.predict(x);
        }
        trees.push(tree);
    }
    Ok(BoostingModel {
        spec: spec.clone(),
        feature_names,
        base_score,
        learning_rate,
        trees,
    })
}

impl BoostingModel {
    pub fn raw_score(&self, x: &[f64]) -> f64 {
        self.base_score
            + self.learning_rate * self.trees.iter().map(|t| t.predict(x)).sum::<f64>()
    }

    pub fn predict_proba(&self, instances: &[Vec<f64>]) -> Vec<f64> {
        instances
            .iter()
            .map(|x| sigmoid(self.raw_score(x)))
            .collect()
    }
}
