//! CART decision tree with Gini impurity.
//!
//! Splits are evaluated over every candidate feature at midpoints between
//! sorted distinct values; ties break to the first candidate encountered.
//! Growth stops at purity, `min_samples_split`, or the depth cap.

use super::{ModelError, ModelSpec};
use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum Node {
    Leaf {
        /// Fraction of at-risk training rows that reached this leaf.
        probability: f64,
        n: usize,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: Box<Node>,
        right: Box<Node>,
    },
}

impl Node {
    pub fn predict(&self, x: &[f64]) -> f64 {
        match self {
            Node::Leaf { probability, .. } => *probability,
            Node::Split {
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

    pub fn depth(&self) -> usize {
        match self {
            Node::Leaf { .. } => 0,
            Node::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TreeModel {
    pub spec: ModelSpec,
    pub feature_names: Vec<String>,
    pub root: Node,
}

pub(crate) struct GrowConfig {
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    /// Features drawn per split; `None` uses all features.
    pub max_features: Option<usize>,
}

fn gini(pos: f64, total: f64) -> f64 {
    if total == 0.0 {
        return 0.0;
    }
    let p = pos / total;
    2.0 * p * (1.0 - p)
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    impurity: f64,
}

/// Best weighted-Gini split of `indices` over the candidate features, ties to
/// the first encountered (feature order, then ascending threshold).
fn best_split(
    x: &[Vec<f64>],
    y: &[bool],
    indices: &[usize],
    features: &[usize],
) -> Option<BestSplit> {
    let total = indices.len() as f64;
    let total_pos = indices.iter().filter(|&&i| y[i]).count() as f64;
    let mut best: Option<BestSplit> = None;
    for &feature in features {
        let mut order: Vec<usize> = indices.to_vec();
        order.sort_by(|&a, &b| x[a][feature].partial_cmp(&x[b][feature]).unwrap());
        let mut left_n = 0.0;
        let mut left_pos = 0.0;
        let mut i = 0;
        while i < order.len() {
            // Advance over the run of equal values so every row with the
            // same feature value lands on the same side.
            let value = x[order[i]][feature];
            while i < order.len() && x[order[i]][feature] == value {
                left_n += 1.0;
                left_pos += if y[order[i]] { 1.0 } else { 0.0 };
                i += 1;
            }
            if i == order.len() {
                break;
            }
            let next = x[order[i]][feature];
            let threshold = 0.5 * (value + next);
            // Degenerate midpoint (adjacent representable values): skip.
            if !(threshold > value && threshold < next) && threshold != value {
                continue;
            }
            let right_n = total - left_n;
            let impurity = (left_n / total) * gini(left_pos, left_n)
                + (right_n / total) * gini(total_pos - left_pos, right_n);
            if best.as_ref().map_or(true, |b| impurity < b.impurity - 1e-15) {
                best = Some(BestSplit {
                    feature,
                    threshold,
                    impurity,
                });
            }
        }
    }
    // Zero-gain splits stay eligible: XOR-style layouts need a first cut
    // that doesn't lower Gini before purity becomes reachable. Children are
    // always non-empty, so recursion still terminates.
    best
}

pub(crate) fn grow(
    x: &[Vec<f64>],
    y: &[bool],
    indices: &[usize],
    depth: usize,
    config: &GrowConfig,
    rng: &mut Option<&mut ChaCha8Rng>,
) -> Node {
    let n = indices.len();
    let pos = indices.iter().filter(|&&i| y[i]).count();
    let leaf = |pos: usize, n: usize| Node::Leaf {
        probability: pos as f64 / n as f64,
        n,
    };
    if pos == 0 || pos == n || n < config.min_samples_split {
        return leaf(pos, n);
    }
    if let Some(cap) = config.max_depth {
        if depth >= cap {
            return leaf(pos, n);
        }
    }
    let d = x[0].len();
    let features: Vec<usize> = match (config.max_features, rng.as_deref_mut()) {
        (Some(m), Some(rng)) if m < d => {
            let mut all: Vec<usize> = (0..d).collect();
            all.shuffle(rng);
            let mut picked = all[..m].to_vec();
            picked.sort_unstable();
            picked
        }
        _ => (0..d).collect(),
    };
    match best_split(x, y, indices, &features) {
        None => {
            // A random feature subset can be unsplittable even when the node
            // is impure; fall back to the full feature set once.
            if features.len() < d {
                match best_split(x, y, indices, &(0..d).collect::<Vec<_>>()) {
                    None => leaf(pos, n),
                    Some(split) => split_node(x, y, indices, depth, config, rng, split),
                }
            } else {
                leaf(pos, n)
            }
        }
        Some(split) => split_node(x, y, indices, depth, config, rng, split),
    }
}

fn split_node(
    x: &[Vec<f64>],
    y: &[bool],
    indices: &[usize],
    depth: usize,
    config: &GrowConfig,
    rng: &mut Option<&mut ChaCha8Rng>,
    split: BestSplit,
) -> Node {
    let (left_idx, right_idx): (Vec<usize>, Vec<usize>) = indices
        .iter()
        .copied()
        .partition(|&i| x[i][split.feature] <= split.threshold);
    let left = grow(x, y, &left_idx, depth + 1, config, rng);
    let right = grow(x, y, &right_idx, depth + 1, config, rng);
    Node::Split {
        feature: split.feature,
        threshold: split.threshold,
        left: Box::new(left),
        right: Box::new(right),
    }
}

pub fn fit(
    spec: &ModelSpec,
    instances: &[Vec<f64>],
    labels: &[bool],
    feature_names: Vec<String>,
) -> Result<TreeModel, ModelError> {
    let config = GrowConfig {
        max_depth: spec.opt_usize_param("max_depth")?,
        min_samples_split: spec.usize_param("min_samples_split", 2)?,
        max_features: None,
    };
    let indices: Vec<usize> = (0..instances.len()).collect();
    let root = grow(instances, labels, &indices, 0, &config, &mut None);
    Ok(TreeModel {
        spec: spec.clone(),
        feature_names,
        root,
    })
}

impl TreeModel {
    pub fn predict_proba(&self, instances: &[Vec<f64>]) -> Vec<f64> {
        instances.iter().map(|x| self.root.predict(x)).collect()
    }
}
