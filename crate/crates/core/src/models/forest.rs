//! Random forest of CART trees.
//!
//! Each tree trains on a bootstrap sample with per-split feature subsampling
//! of size ⌈log2(d)⌉. Per-tree seeds are derived from the master seed up
//! front, so trees may train in parallel with results identical to the
//! sequential order. Probability output is the fraction of trees voting
//! at-risk.

use super::tree::{grow, GrowConfig, Node};
use super::{ModelError, ModelSpec};
use crate::seed;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ForestModel {
    pub spec: ModelSpec,
    pub feature_names: Vec<String>,
    pub trees: Vec<Node>,
}

pub fn fit(
    spec: &ModelSpec,
    instances: &[Vec<f64>],
    labels: &[bool],
    feature_names: Vec<String>,
) -> Result<ForestModel, ModelError> {
    if labels.iter().all(|&y| y) || labels.iter().all(|&y| !y) {
        return Err(ModelError::SingleClassTraining);
    }
    let n_estimators = spec.usize_param("n_estimators", 100)?.max(1);
    let bootstrap = spec.usize_param("bootstrap", 1)? != 0;
    let d = feature_names.len();
    let max_features = match spec.hyperparameters.get("max_features") {
        Some(super::ParamValue::Text(t)) if t == "all" => None,
        Some(super::ParamValue::Int(m)) if *m >= 1 => Some((*m as usize).min(d)),
        None => Some(((d as f64).log2().ceil() as usize).clamp(1, d)),
        Some(super::ParamValue::Text(t)) if t == "log2" => {
            Some(((d as f64).log2().ceil() as usize).clamp(1, d))
        }
        Some(_) => {
            return Err(ModelError::InvalidHyperparameter {
                family: spec.family,
                name: "max_features".into(),
                reason: "expected \"log2\", \"all\", or a positive integer".into(),
            })
        }
    };
    let config = GrowConfig {
        max_depth: spec.opt_usize_param("max_depth")?,
        min_samples_split: spec.usize_param("min_samples_split", 2)?,
        max_features,
    };
    let n = instances.len();
    let trees: Vec<Node> = (0..n_estimators)
        .into_par_iter()
        .map(|t| {
            let mut rng = seed::rng(spec.seed, "forest-tree", t as u64);
            let indices: Vec<usize> = if bootstrap {
                (0..n).map(|_| rng.gen_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            grow(instances, labels, &indices, 0, &config, &mut Some(&mut rng))
        })
        .collect();
    Ok(ForestModel {
        spec: spec.clone(),
        feature_names,
        trees,
    })
}

impl ForestModel {
    pub fn predict_proba(&self, instances: &[Vec<f64>]) -> Vec<f64> {
        instances
            .iter()
            .map(|x| {
                let votes = self
                    .trees
                    .iter()
                    .filter(|t| t.predict(x) >= 0.5)
                    .count();
                votes as f64 / self.trees.len() as f64
            })
            .collect()
    }
}
