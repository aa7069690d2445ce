//! Exhaustive grid search under stratified k-fold cross-validation.
//!
//! Folds are fixed once per search and shared by every candidate. The grid
//! is the Cartesian product of the candidate lists, enumerated with
//! parameter names in sorted order and the last name varying fastest; ties
//! on mean accuracy break toward the earlier grid point.

use super::{train, ModelError, ModelFamily, ModelSpec, ParamValue};
use crate::seed;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CvEntry {
    pub spec: ModelSpec,
    pub mean_accuracy: f64,
    pub fold_accuracies: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridSearchResult {
    pub best_spec: ModelSpec,
    pub cv_table: Vec<CvEntry>,
}

/// Stratified folds: class indices are shuffled seeded, then dealt
/// round-robin. Returns the fold id of each instance.
pub fn stratified_folds(labels: &[bool], folds: usize, seed_value: u64) -> Vec<usize> {
    let mut assignment = vec![0usize; labels.len()];
    for (class, stage_index) in [(false, 0u64), (true, 1u64)] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        let mut rng = seed::rng(seed_value, "cv-folds", stage_index);
        idx.shuffle(&mut rng);
        for (pos, &i) in idx.iter().enumerate() {
            assignment[i] = pos % folds;
        }
    }
    assignment
}

fn cartesian_product(grid: &BTreeMap<String, Vec<ParamValue>>) -> Vec<BTreeMap<String, ParamValue>> {
    let keys: Vec<&String> = grid.keys().collect();
    let mut out = vec![BTreeMap::new()];
    for key in keys {
        let values = &grid[key];
        let mut next = Vec::with_capacity(out.len() * values.len());
        for partial in &out {
            for value in values {
                let mut point = partial.clone();
                point.insert(key.clone(), value.clone());
                next.push(point);
            }
        }
        out = next;
    }
    out
}

pub fn grid_search(
    family: ModelFamily,
    grid: &BTreeMap<String, Vec<ParamValue>>,
    instances: &[Vec<f64>],
    labels: &[bool],
    feature_names: &[String],
    folds: usize,
    seed_value: u64,
) -> Result<GridSearchResult, ModelError> {
    if grid.is_empty() || grid.values().any(|v| v.is_empty()) {
        return Err(ModelError::EmptyGrid);
    }
    if folds < 2 {
        return Err(ModelError::EmptyGrid);
    }
    let candidates = cartesian_product(grid);
    let fold_of = stratified_folds(labels, folds, seed_value);

    let cv_table: Vec<CvEntry> = candidates
        .into_par_iter()
        .map(|hyperparameters| {
            let spec = ModelSpec {
                family,
                hyperparameters,
                seed: seed_value,
            };
            spec.validate()?;
            let mut fold_accuracies = Vec::with_capacity(folds);
            for fold in 0..folds {
                let (mut train_x, mut train_y) = (Vec::new(), Vec::new());
                let (mut val_x, mut val_y) = (Vec::new(), Vec::new());
                for i in 0..instances.len() {
                    if fold_of[i] == fold {
                        val_x.push(instances[i].clone());
                        val_y.push(labels[i]);
                    } else {
                        train_x.push(instances[i].clone());
                        train_y.push(labels[i]);
                    }
                }
                // A candidate that fails to train scores zero on the fold
                // rather than aborting the whole search.
                let accuracy = match train(&spec, &train_x, &train_y, feature_names) {
                    Err(_) => 0.0,
                    Ok(model) => {
                        let predictions = model.predict(&val_x)?;
                        let correct =
                            predictions.iter().zip(&val_y).filter(|(p, y)| p == y).count();
                        correct as f64 / val_y.len().max(1) as f64
                    }
                };
                fold_accuracies.push(accuracy);
            }
            let mean_accuracy = fold_accuracies.iter().sum::<f64>() / folds as f64;
            Ok(CvEntry {
                spec,
                mean_accuracy,
                fold_accuracies,
            })
        })
        .collect::<Result<_, ModelError>>()?;

    let mut best = 0;
    for (i, entry) in cv_table.iter().enumerate() {
        if entry.mean_accuracy > cv_table[best].mean_accuracy {
            best = i;
        }
    }
    Ok(GridSearchResult {
        best_spec: cv_table[best].spec.clone(),
        cv_table,
    })
}
