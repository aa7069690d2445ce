//! Exact interventional Shapley attribution over the 4-feature space.
//!
//! With d = 4 there are only 2⁴ coalitions, so values are enumerated exactly:
//! v(S) is the mean model output over background rows with the instance's
//! values spliced in on S, and φ_i is the weighted sum of marginal
//! contributions |S|!(d−|S|−1)!/d! · [v(S∪{i}) − v(S)].

use crate::models::{ModelError, TrainedModel};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExplainError {
    #[error("background set is empty")]
    EmptyBackground,
    #[error("no instances to explain")]
    NoInstances,
    #[error(transparent)]
    Model(#[from] ModelError),
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Mean model output for every coalition mask over the background rows.
fn coalition_values(
    model: &TrainedModel,
    instance: &[f64],
    background: &[Vec<f64>],
) -> Result<Vec<f64>, ExplainError> {
    let d = instance.len();
    let n_masks = 1usize << d;
    let mut hybrids = Vec::with_capacity(n_masks * background.len());
    for mask in 0..n_masks {
        for row in background {
            let mut hybrid = row.clone();
            for j in 0..d {
                if mask & (1 << j) != 0 {
                    hybrid[j] = instance[j];
                }
            }
            hybrids.push(hybrid);
        }
    }
    let outputs = model.predict_proba(&hybrids)?;
    Ok(outputs
        .chunks(background.len())
        .map(|chunk| chunk.iter().sum::<f64>() / background.len() as f64)
        .collect())
}

/// Exact Shapley values and the baseline v(∅) for one instance.
pub fn shapley_values(
    model: &TrainedModel,
    instance: &[f64],
    background: &[Vec<f64>],
) -> Result<(Vec<f64>, f64), ExplainError> {
    if background.is_empty() {
        return Err(ExplainError::EmptyBackground);
    }
    let d = instance.len();
    let values = coalition_values(model, instance, background)?;
    let d_fact = factorial(d);
    let mut phi = vec![0.0; d];
    for (j, p) in phi.iter_mut().enumerate() {
        let bit = 1usize << j;
        for mask in 0..values.len() {
            if mask & bit != 0 {
                continue;
            }
            let s = (mask as u32).count_ones() as usize;
            let weight = factorial(s) * factorial(d - s - 1) / d_fact;
            *p += weight * (values[mask | bit] - values[mask]);
        }
    }
    Ok((phi, values[0]))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ShapReport {
    /// Expected model output over the background set, v(∅).
    pub baseline: f64,
    /// One φ vector per explained instance.
    pub phi: Vec<Vec<f64>>,
    pub background_size: usize,
    pub mean_abs_phi: Vec<f64>,
    /// 1 = most important; exact ties share the average rank.
    pub rank: Vec<f64>,
    pub feature_names: Vec<String>,
}

/// Descending ranks of `values` with ties shared (average rank).
pub fn shared_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].partial_cmp(&values[a]).unwrap().then(a.cmp(&b)));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        let shared = (i + 1..=j).map(|r| r as f64).sum::<f64>() / (j - i) as f64;
        for &k in &order[i..j] {
            ranks[k] = shared;
        }
        i = j;
    }
    ranks
}

pub fn summarize(
    model: &TrainedModel,
    instances: &[Vec<f64>],
    background: &[Vec<f64>],
) -> Result<ShapReport, ExplainError> {
    if instances.is_empty() {
        return Err(ExplainError::NoInstances);
    }
    if background.is_empty() {
        return Err(ExplainError::EmptyBackground);
    }
    let results: Vec<(Vec<f64>, f64)> = instances
        .par_iter()
        .map(|instance| shapley_values(model, instance, background))
        .collect::<Result<_, _>>()?;
    let baseline = results[0].1;
    let phi: Vec<Vec<f64>> = results.into_iter().map(|(p, _)| p).collect();
    let d = phi[0].len();
    let mut mean_abs_phi = vec![0.0; d];
    for row in &phi {
        for (m, v) in mean_abs_phi.iter_mut().zip(row) {
            *m += v.abs();
        }
    }
    for m in mean_abs_phi.iter_mut() {
        *m /= phi.len() as f64;
    }
    let rank = shared_ranks(&mean_abs_phi);
    Ok(ShapReport {
        baseline,
        phi,
        background_size: background.len(),
        mean_abs_phi,
        rank,
        feature_names: model.feature_names().to_vec(),
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RankRow {
    pub model: String,
    pub ranks: Vec<f64>,
}

/// Per-family importance ranks plus the overall mean-rank row.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RankTable {
    pub feature_names: Vec<String>,
    pub rows: Vec<RankRow>,
    /// Mean rank per feature across models; equal means are shared ranks.
    pub overall: Vec<f64>,
}

pub fn rank_table(reports: &[(String, &ShapReport)]) -> RankTable {
    let feature_names = reports
        .first()
        .map(|(_, r)| r.feature_names.clone())
        .unwrap_or_default();
    let d = feature_names.len();
    let mut overall = vec![0.0; d];
    let mut rows = Vec::with_capacity(reports.len());
    for (name, report) in reports {
        for (o, r) in overall.iter_mut().zip(&report.rank) {
            *o += r;
        }
        rows.push(RankRow {
            model: name.clone(),
            ranks: report.rank.clone(),
        });
    }
    for o in overall.iter_mut() {
        *o /= reports.len().max(1) as f64;
    }
    RankTable {
        feature_names,
        rows,
        overall,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{train, ModelFamily, ModelSpec};
    use rand::Rng;

    fn names(d: usize) -> Vec<String> {
        (0..d).map(|i| format!("f{i}")).collect()
    }

    /// Independent oracle: mean marginal contribution over all d! orderings.
    fn permutation_shapley(
        model: &TrainedModel,
        instance: &[f64],
        background: &[Vec<f64>],
    ) -> Vec<f64> {
        fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
            if items.len() <= 1 {
                return vec![items.to_vec()];
            }
            let mut out = Vec::new();
            for (i, &head) in items.iter().enumerate() {
                let rest: Vec<usize> = items
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| *j != i)
                    .map(|(_, &v)| v)
                    .collect();
                for mut tail in permutations(&rest) {
                    tail.insert(0, head);
                    out.push(tail);
                }
            }
            out
        }
        let d = instance.len();
        let value = |mask: usize| -> f64 {
            let hybrids: Vec<Vec<f64>> = background
                .iter()
                .map(|row| {
                    let mut h = row.clone();
                    for j in 0..d {
                        if mask & (1 << j) != 0 {
                            h[j] = instance[j];
                        }
                    }
                    h
                })
                .collect();
            let out = model.predict_proba(&hybrids).unwrap();
            out.iter().sum::<f64>() / out.len() as f64
        };
        let perms = permutations(&(0..d).collect::<Vec<_>>());
        let mut phi = vec![0.0; d];
        for perm in &perms {
            let mut mask = 0usize;
            for &j in perm {
                let before = value(mask);
                mask |= 1 << j;
                phi[j] += value(mask) - before;
            }
        }
        for p in phi.iter_mut() {
            *p /= perms.len() as f64;
        }
        phi
    }

    fn tree_model(seed: u64) -> (TrainedModel, Vec<Vec<f64>>) {
        let mut rng = crate::seed::rng_from(seed);
        let x: Vec<Vec<f64>> = (0..60)
            .map(|_| (0..4).map(|_| rng.gen::<f64>()).collect())
            .collect();
        let y: Vec<bool> = x.iter().map(|r| r[0] + r[2] > 1.0).collect();
        let model = train(&ModelSpec::new(ModelFamily::DecisionTree, 0), &x, &y, &names(4)).unwrap();
        (model, x)
    }

    #[test]
    fn linear_model_has_the_analytic_attribution() {
        // A logistic model with tiny weights is linear to within O(z³):
        // sigmoid(z) = 0.5 + z/4 − z³/48 + …, so with |z| ≈ 1e-4 the
        // analytic φ_j = (w_j/4)(x_j − mean background_j) holds to ~1e-13.
        let scale = 1e-4;
        let w = [0.3, -0.2, 0.5, 0.1];
        let model = TrainedModel::Logistic(crate::models::logistic::LogisticModel {
            spec: ModelSpec::new(ModelFamily::LogisticRegression, 0),
            feature_names: names(4),
            weights: w.iter().map(|v| v * scale).collect(),
            intercept: 0.0,
            n_iterations: 0,
        });
        let background: Vec<Vec<f64>> = vec![
            vec![0.1, 0.2, 0.3, 0.4],
            vec![0.5, 0.5, 0.5, 0.5],
            vec![0.9, 0.1, 0.2, 0.8],
        ];
        let instance = [0.7, 0.6, 0.9, 0.2];
        let mean_bg: Vec<f64> = (0..4)
            .map(|j| background.iter().map(|r| r[j]).sum::<f64>() / 3.0)
            .collect();
        let (phi, baseline) = shapley_values(&model, &instance, &background).unwrap();
        for j in 0..4 {
            let expected = w[j] * scale / 4.0 * (instance[j] - mean_bg[j]);
            assert!(
                (phi[j] - expected).abs() < 1e-11,
                "feature {j}: {} vs {expected}",
                phi[j]
            );
        }
        assert!((baseline - 0.5).abs() < 1e-4);
    }

    #[test]
    fn ignored_feature_gets_zero_phi() {
        // A stump on feature 0 only: every other feature is a dummy.
        let x = vec![
            vec![0.0, 9.0, 3.0, 7.0],
            vec![0.1, 1.0, 4.0, 2.0],
            vec![0.9, 5.0, 8.0, 6.0],
            vec![1.0, 2.0, 1.0, 3.0],
        ];
        let y = [false, false, true, true];
        let model = train(&ModelSpec::new(ModelFamily::DecisionTree, 0), &x, &y, &names(4)).unwrap();
        let (phi, _) = shapley_values(&model, &[0.8, 100.0, -5.0, 42.0], &x).unwrap();
        assert_eq!(phi[1], 0.0);
        assert_eq!(phi[2], 0.0);
        assert_eq!(phi[3], 0.0);
        assert!(phi[0] != 0.0);
    }

    #[test]
    fn coalition_enumeration_matches_the_permutation_oracle() {
        let (model, x) = tree_model(71);
        let background: Vec<Vec<f64>> = x[..10].to_vec();
        for instance in x[10..15].iter() {
            let (phi, _) = shapley_values(&model, instance, &background).unwrap();
            let oracle = permutation_shapley(&model, instance, &background);
            for j in 0..4 {
                assert!(
                    (phi[j] - oracle[j]).abs() < 1e-10,
                    "feature {j}: {} vs {}",
                    phi[j],
                    oracle[j]
                );
            }
        }
    }

    #[test]
    fn efficiency_holds_for_every_instance() {
        let (model, x) = tree_model(72);
        let background: Vec<Vec<f64>> = x[..20].to_vec();
        for instance in x.iter() {
            let (phi, baseline) = shapley_values(&model, instance, &background).unwrap();
            let output = model.predict_proba(std::slice::from_ref(instance)).unwrap()[0];
            let total = baseline + phi.iter().sum::<f64>();
            assert!((total - output).abs() < 1e-9, "{total} vs {output}");
        }
    }

    #[test]
    fn exchangeable_features_get_equal_phi() {
        // Model symmetric in features 0 and 1 (sum threshold), symmetric
        // background, symmetric instance values.
        let x = vec![
            vec![0.0, 0.0],
            vec![0.0, 1.0],
            vec![1.0, 0.0],
            vec![1.0, 1.0],
        ];
        let y = [false, false, false, true];
        let model = train(
            &ModelSpec::new(ModelFamily::GaussianNaiveBayes, 0),
            &x,
            &y,
            &names(2),
        )
        .unwrap();
        let (phi, _) = shapley_values(&model, &[0.8, 0.8], &x).unwrap();
        assert!((phi[0] - phi[1]).abs() < 1e-9);
    }

    #[test]
    fn empty_background_is_rejected() {
        let (model, x) = tree_model(73);
        assert!(matches!(
            shapley_values(&model, &x[0], &[]),
            Err(ExplainError::EmptyBackground)
        ));
    }

    #[test]
    fn identical_instances_get_identical_phi() {
        let (model, x) = tree_model(74);
        let background = x[..10].to_vec();
        let instances = vec![x[20].clone(), x[20].clone(), x[20].clone()];
        let report = summarize(&model, &instances, &background).unwrap();
        assert_eq!(report.phi[0], report.phi[1]);
        assert_eq!(report.phi[1], report.phi[2]);
    }

    #[test]
    fn rank_follows_mean_abs_phi() {
        let ranks = shared_ranks(&[0.30, 0.20, 0.05, 0.10]);
        assert_eq!(ranks, vec![1.0, 2.0, 4.0, 3.0]);
        let tied = shared_ranks(&[0.5, 0.2, 0.2, 0.1]);
        assert_eq!(tied, vec![1.0, 2.5, 2.5, 4.0]);
    }

    #[test]
    fn rank_table_overall_is_the_mean_rank() {
        let base = ShapReport {
            baseline: 0.0,
            phi: vec![],
            background_size: 1,
            mean_abs_phi: vec![],
            rank: vec![1.0, 2.0, 3.0, 4.0],
            feature_names: names(4),
        };
        let mut second = base.clone();
        second.rank = vec![1.0, 3.0, 2.0, 4.0];
        let table = rank_table(&[("a".into(), &base), ("b".into(), &second)]);
        assert_eq!(table.overall, vec![1.0, 2.5, 2.5, 4.0]);
        let single = rank_table(&[("a".into(), &base)]);
        assert_eq!(single.overall, vec![1.0, 2.0, 3.0, 4.0]);
    }
}
