//! Gaussian naive Bayes with sklearn-style variance smoothing.

use super::{ModelError, ModelSpec};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GaussianNbModel {
    pub spec: ModelSpec,
    pub feature_names: Vec<String>,
    /// log prior for [negative, positive].
    pub log_prior: [f64; 2],
    pub means: [Vec<f64>; 2],
    /// Per-class population variances after smoothing.
    pub variances: [Vec<f64>; 2],
}

pub fn fit(
    spec: &ModelSpec,
    instances: &[Vec<f64>],
    labels: &[bool],
    feature_names: Vec<String>,
) -> Result<GaussianNbModel, ModelError> {
    let var_smoothing = spec.f64_param("var_smoothing", 1e-9)?;
    let d = feature_names.len();
    let n = instances.len() as f64;
    let counts = [
        labels.iter().filter(|&&y| !y).count(),
        labels.iter().filter(|&&y| y).count(),
    ];
    if counts[0] == 0 || counts[1] == 0 {
        return Err(ModelError::SingleClassTraining);
    }

    let mut means = [vec![0.0; d], vec![0.0; d]];
    for (x, &y) in instances.iter().zip(labels) {
        let c = y as usize;
        for j in 0..d {
            means[c][j] += x[j];
        }
    }
    for c in 0..2 {
        for m in means[c].iter_mut() {
            *m /= counts[c] as f64;
        }
    }
    let mut variances = [vec![0.0; d], vec![0.0; d]];
    for (x, &y) in instances.iter().zip(labels) {
        let c = y as usize;
        for j in 0..d {
            variances[c][j] += (x[j] - means[c][j]).powi(2);
        }
    }
    for c in 0..2 {
        for v in variances[c].iter_mut() {
            *v /= counts[c] as f64;
        }
    }
    // Floor: var_smoothing times the largest overall feature variance.
    let mut overall_max_var = 0.0f64;
    for j in 0..d {
        let mean = instances.iter().map(|x| x[j]).sum::<f64>() / n;
        let var = instances.iter().map(|x| (x[j] - mean).powi(2)).sum::<f64>() / n;
        overall_max_var = overall_max_var.max(var);
    }
    let floor = (var_smoothing * overall_max_var).max(1e-300);
    for c in 0..2 {
        for v in variances[c].iter_mut() {
            *v += floor;
        }
    }

    Ok(GaussianNbModel {
        spec: spec.clone(),
        feature_names,
        log_prior: [
            (counts[0] as f64 / n).ln(),
            (counts[1] as f64 / n).ln(),
        ],
        means,
        variances,
    })
}

impl GaussianNbModel {
    fn log_joint(&self, x: &[f64], c: usize) -> f64 {
        let mut ll = self.log_prior[c];
        for j in 0..x.len() {
            let var = self.variances[c][j];
            ll += -0.5 * (2.0 * std::f64::consts::PI * var).ln()
                - (x[j] - self.means[c][j]).powi(2) / (2.0 * var);
        }
        ll
    }

    pub fn predict_proba(&self, instances: &[Vec<f64>]) -> Vec<f64> {
        instances
            .iter()
            .map(|x| {
                let l0 = self.log_joint(x, 0);
                let l1 = self.log_joint(x, 1);
                let m = l0.max(l1);
                let e0 = (l0 - m).exp();
                let e1 = (l1 - m).exp();
                e1 / (e0 + e1)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{ModelFamily, ModelSpec};

    fn names(d: usize) -> Vec<String> {
        (0..d).map(|i| format!("f{i}")).collect()
    }

    #[test]
    fn symmetric_classes_give_half_at_the_midpoint() {
        // Classes mirrored about 0.5 with equal spread and priors.
        let x = vec![
            vec![0.1],
            vec![0.2],
            vec![0.3],
            vec![0.7],
            vec![0.8],
            vec![0.9],
        ];
        let y = [false, false, false, true, true, true];
        let spec = ModelSpec::new(ModelFamily::GaussianNaiveBayes, 0);
        let model = fit(&spec, &x, &y, names(1)).unwrap();
        let p = model.predict_proba(&[vec![0.5]])[0];
        assert!((p - 0.5).abs() < 1e-9, "midpoint probability {p}");
    }

    #[test]
    fn variance_floor_keeps_constant_features_finite() {
        let x = vec![vec![1.0, 0.0], vec![1.0, 0.2], vec![1.0, 0.8], vec![1.0, 1.0]];
        let y = [false, false, true, true];
        let spec = ModelSpec::new(ModelFamily::GaussianNaiveBayes, 0);
        let model = fit(&spec, &x, &y, names(2)).unwrap();
        for p in model.predict_proba(&x) {
            assert!(p.is_finite() && (0.0..=1.0).contains(&p));
        }
    }

    #[test]
    fn priors_shift_the_decision() {
        // 3:1 negative prior pulls an ambiguous point below 0.5.
        let x = vec![vec![0.0], vec![0.2], vec![0.4], vec![0.6]];
        let y = [false, false, false, true];
        let spec = ModelSpec::new(ModelFamily::GaussianNaiveBayes, 0);
        let model = fit(&spec, &x, &y, names(1)).unwrap();
        assert!((model.log_prior[0] - (0.75f64).ln()).abs() < 1e-12);
        assert!((model.log_prior[1] - (0.25f64).ln()).abs() < 1e-12);
    }

    #[test]
    fn single_class_is_rejected() {
        let spec = ModelSpec::new(ModelFamily::GaussianNaiveBayes, 0);
        assert!(matches!(
            fit(&spec, &[vec![0.0], vec![1.0]], &[false, false], names(1)),
            Err(ModelError::SingleClassTraining)
        ));
    }
}
