//! Test-set evaluation: accuracy at the 0.5 threshold, ROC by sweeping
//! distinct score thresholds (ties grouped), AUC by the trapezoidal rule.

use super::{ModelError, TrainedModel};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: f64,
    /// Absent when the test set has a single class (AUC undefined).
    pub auc: Option<f64>,
    /// (false-positive rate, true-positive rate), from (0,0) to (1,1).
    pub roc_points: Vec<(f64, f64)>,
    /// confusion[actual][predicted], 0 = negative, 1 = at-risk.
    pub confusion: [[u64; 2]; 2],
    pub n_test: usize,
}

/// ROC points for scores against labels. Equal scores collapse into a single
/// threshold step so ties never order one way by accident.
pub fn roc_curve(scores: &[f64], labels: &[bool]) -> Vec<(f64, f64)> {
    let n_pos = labels.iter().filter(|&&y| y).count() as f64;
    let n_neg = labels.len() as f64 - n_pos;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap());
    let mut points = vec![(0.0, 0.0)];
    let mut tp = 0.0;
    let mut fp = 0.0;
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]] {
                tp += 1.0;
            } else {
                fp += 1.0;
            }
            i += 1;
        }
        points.push((fp / n_neg, tp / n_pos));
    }
    points
}

/// Area under the ROC by the trapezoidal rule.
pub fn auc_from_roc(points: &[(f64, f64)]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * 0.5 * (w[0].1 + w[1].1))
        .sum()
}

pub fn evaluate(
    model: &TrainedModel,
    instances: &[Vec<f64>],
    labels: &[bool],
) -> Result<EvalReport, ModelError> {
    if instances.is_empty() {
        return Err(ModelError::EmptyTrainingSet);
    }
    let scores = model.predict_proba(instances)?;
    let mut confusion = [[0u64; 2]; 2];
    for (s, &y) in scores.iter().zip(labels) {
        confusion[y as usize][(*s >= 0.5) as usize] += 1;
    }
    let accuracy = (confusion[0][0] + confusion[1][1]) as f64 / labels.len() as f64;
    let single_class = labels.iter().all(|&y| y) || labels.iter().all(|&y| !y);
    let (auc, roc_points) = if single_class {
        (None, Vec::new())
    } else {
        let roc = roc_curve(&scores, labels);
        (Some(auc_from_roc(&roc)), roc)
    };
    Ok(EvalReport {
        accuracy,
        auc,
        roc_points,
        confusion,
        n_test: labels.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{train, ModelFamily, ModelSpec};
    use rand::Rng;

    /// Mann-Whitney AUC: fraction of positive-negative pairs correctly
    /// ordered, ties counted one half.
    fn mann_whitney(scores: &[f64], labels: &[bool]) -> f64 {
        let mut wins = 0.0;
        let mut pairs = 0.0;
        for i in 0..scores.len() {
            for j in 0..scores.len() {
                if labels[i] && !labels[j] {
                    pairs += 1.0;
                    if scores[i] > scores[j] {
                        wins += 1.0;
                    } else if scores[i] == scores[j] {
                        wins += 0.5;
                    }
                }
            }
        }
        wins / pairs
    }

    #[test]
    fn worked_auc_example() {
        let labels = [false, false, true, true];
        let scores = [0.1, 0.4, 0.35, 0.8];
        let roc = roc_curve(&scores, &labels);
        assert!((auc_from_roc(&roc) - 0.75).abs() < 1e-12);
        assert!((mann_whitney(&scores, &labels) - 0.75).abs() < 1e-12);
    }

    #[test]
    fn perfect_and_reversed_rankings() {
        let labels = [false, true, false, true];
        let perfect: Vec<f64> = labels.iter().map(|&y| y as u8 as f64).collect();
        let reversed: Vec<f64> = labels.iter().map(|&y| 1.0 - y as u8 as f64).collect();
        assert_eq!(auc_from_roc(&roc_curve(&perfect, &labels)), 1.0);
        assert_eq!(auc_from_roc(&roc_curve(&reversed, &labels)), 0.0);
    }

    #[test]
    fn trapezoid_auc_equals_mann_whitney_on_random_vectors() {
        let mut rng = crate::seed::rng_from(61);
        for trial in 0..50 {
            let n = rng.gen_range(4..40);
            // Coarse grid scores force plenty of ties.
            let scores: Vec<f64> = (0..n)
                .map(|_| (rng.gen::<f64>() * 5.0).floor() / 5.0)
                .collect();
            let mut labels: Vec<bool> = (0..n).map(|_| rng.gen::<bool>()).collect();
            if labels.iter().all(|&y| y) {
                labels[0] = false;
            }
            if labels.iter().all(|&y| !y) {
                labels[0] = true;
            }
            let got = auc_from_roc(&roc_curve(&scores, &labels));
            let want = mann_whitney(&scores, &labels);
            assert!((got - want).abs() < 1e-12, "trial {trial}: {got} vs {want}");
        }
    }

    #[test]
    fn roc_points_are_monotone_with_fixed_endpoints() {
        let scores = [0.2, 0.2, 0.5, 0.9, 0.9, 0.1];
        let labels = [false, true, false, true, true, false];
        let roc = roc_curve(&scores, &labels);
        assert_eq!(roc[0], (0.0, 0.0));
        assert_eq!(*roc.last().unwrap(), (1.0, 1.0));
        for w in roc.windows(2) {
            assert!(w[1].0 >= w[0].0 && w[1].1 >= w[0].1);
        }
    }

    #[test]
    fn single_class_test_omits_auc_but_reports_accuracy() {
        let names = vec!["f0".to_string()];
        let spec = ModelSpec::new(ModelFamily::GaussianNaiveBayes, 0);
        let model = train(
            &spec,
            &[vec![0.0], vec![0.2], vec![0.8], vec![1.0]],
            &[false, false, true, true],
            &names,
        )
        .unwrap();
        let report = evaluate(&model, &[vec![0.9], vec![1.0]], &[true, true]).unwrap();
        assert!(report.auc.is_none());
        assert_eq!(report.accuracy, 1.0);
        assert_eq!(report.confusion[1][1], 2);
    }

    #[test]
    fn accuracy_matches_the_confusion_matrix() {
        let names = vec!["f0".to_string()];
        let spec = ModelSpec::new(ModelFamily::DecisionTree, 0);
        let model = train(
            &spec,
            &[vec![0.0], vec![1.0]],
            &[false, true],
            &names,
        )
        .unwrap();
        let report = evaluate(
            &model,
            &[vec![0.0], vec![0.1], vec![0.9], vec![1.0]],
            &[false, true, true, true],
        )
        .unwrap();
        let total: u64 = report.confusion.iter().flatten().sum();
        assert_eq!(total, 4);
        let correct = report.confusion[0][0] + report.confusion[1][1];
        assert!((report.accuracy - correct as f64 / 4.0).abs() < 1e-12);
    }
}
