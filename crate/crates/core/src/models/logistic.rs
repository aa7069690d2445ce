//! L2-regularized logistic regression by damped Newton iteration.
//!
//! Objective: (1/C)·½‖w‖² + Σᵢ logloss(yᵢ, σ(w·xᵢ + b)); the intercept is
//! not penalized. Newton steps are halved until the objective decreases, and
//! training stops once the gradient norm falls below `tol`.

use super::{sigmoid, solve_linear, ModelError, ModelSpec};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LogisticModel {
    pub spec: ModelSpec,
    pub feature_names: Vec<String>,
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub n_iterations: usize,
}

/// Objective value and gradient (weights then intercept) at `(weights, b)`.
pub fn loss_and_grad(
    weights: &[f64],
    intercept: f64,
    instances: &[Vec<f64>],
    labels: &[bool],
    c: f64,
) -> (f64, Vec<f64>, f64) {
    let d = weights.len();
    let mut loss = 0.5 / c * weights.iter().map(|w| w * w).sum::<f64>();
    let mut grad_w: Vec<f64> = weights.iter().map(|w| w / c).collect();
    let mut grad_b = 0.0;
    for (x, &y) in instances.iter().zip(labels) {
        let z = intercept + weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
        let p = sigmoid(z);
        let t = if y { 1.0 } else { 0.0 };
        // Numerically stable logloss: log(1 + e^z) - t·z.
        loss += if z > 0.0 {
            z + (-z).exp().ln_1p() - t * z
        } else {
            z.exp().ln_1p() - t * z
        };
        let residual = p - t;
        for j in 0..d {
            grad_w[j] += residual * x[j];
        }
        grad_b += residual;
    }
    (loss, grad_w, grad_b)
}

pub fn fit(
    spec: &ModelSpec,
    instances: &[Vec<f64>],
    labels: &[bool],
    feature_names: Vec<String>,
) -> Result<LogisticModel, ModelError> {
    if labels.iter().all(|&y| y) || labels.iter().all(|&y| !y) {
        return Err(ModelError::SingleClassTraining);
    }
    let c = spec.f64_param("C", 1.0)?;
    let max_iter = spec.usize_param("max_iter", 100)?;
    let tol = spec.f64_param("tol", 1e-8)?;
    let d = feature_names.len();

    let mut w = vec![0.0; d];
    let mut b = 0.0;
    let (mut loss, mut grad_w, mut grad_b) = loss_and_grad(&w, b, instances, labels, c);
    let mut iterations = 0;
    for _ in 0..max_iter {
        let grad_norm = (grad_w.iter().map(|g| g * g).sum::<f64>() + grad_b * grad_b).sqrt();
        if grad_norm < tol {
            return Ok(LogisticModel {
                spec: spec.clone(),
                feature_names,
                weights: w,
                intercept: b,
                n_iterations: iterations,
            });
        }
        iterations += 1;

        // Hessian over the augmented parameter vector (weights, intercept).
        let n = d + 1;
        let mut hess = vec![vec![0.0; n]; n];
        for (x, _) in instances.iter().zip(labels) {
            let z = b + w.iter().zip(x).map(|(wj, v)| wj * v).sum::<f64>();
            let p = sigmoid(z);
            let s = (p * (1.0 - p)).max(1e-12);
            for j in 0..d {
                for k in j..d {
                    hess[j][k] += s * x[j] * x[k];
                }
                hess[j][d] += s * x[j];
            }
            hess[d][d] += s;
        }
        for j in 0..d {
            hess[j][j] += 1.0 / c;
            for k in 0..j {
                hess[j][k] = hess[k][j];
            }
            hess[d][j] = hess[j][d];
        }
        hess[d][d] += 1e-10; // keep the unpenalized intercept row nonsingular

        let mut rhs: Vec<f64> = grad_w.clone();
        rhs.push(grad_b);
        let step = solve_linear(hess, rhs).ok_or(ModelError::NonConvergence { last_loss: loss })?;

        // Backtracking on the objective.
        let mut scale = 1.0;
        loop {
            let w_new: Vec<f64> = w.iter().zip(&step).map(|(wj, s)| wj - scale * s).collect();
            let b_new = b - scale * step[d];
            let (loss_new, gw_new, gb_new) = loss_and_grad(&w_new, b_new, instances, labels, c);
            // The roundoff allowance matters near the optimum, where a full
            // Newton step improves the objective by less than one ulp of the
            // accumulated loss and would otherwise be rejected forever.
            if loss_new <= loss + 1e-12 * (1.0 + loss.abs()) || scale < 1e-12 {
                w = w_new;
                b = b_new;
                loss = loss_new;
                grad_w = gw_new;
                grad_b = gb_new;
                break;
            }
            scale *= 0.5;
        }
    }
    let grad_norm = (grad_w.iter().map(|g| g * g).sum::<f64>() + grad_b * grad_b).sqrt();
    if grad_norm < tol {
        Ok(LogisticModel {
            spec: spec.clone(),
            feature_names,
            weights: w,
            intercept: b,
            n_iterations: iterations,
        })
    } else {
        Err(ModelError::NonConvergence { last_loss: loss })
    }
}

impl LogisticModel {
    pub fn predict_proba(&self, instances: &[Vec<f64>]) -> Vec<f64> {
        instances
            .iter()
            .map(|x| {
                sigmoid(
                    self.intercept
                        + self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>(),
                )
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{ModelFamily, ParamValue};
    use rand::Rng;

    fn names(d: usize) -> Vec<String> {
        (0..d).map(|i| format!("f{i}")).collect()
    }

    fn random_problem(seed: u64, n: usize, d: usize) -> (Vec<Vec<f64>>, Vec<bool>) {
        let mut rng = crate::seed::rng_from(seed);
        let x: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| rng.gen::<f64>()).collect())
            .collect();
        let y: Vec<bool> = x
            .iter()
            .map(|row| row.iter().sum::<f64>() / d as f64 + 0.2 * rng.gen::<f64>() > 0.6)
            .collect();
        (x, y)
    }

    #[test]
    fn gradient_norm_below_tolerance_at_c_0_009() {
        let (x, y) = random_problem(1, 120, 4);
        let spec = ModelSpec::new(ModelFamily::LogisticRegression, 0)
            .with("C", ParamValue::Float(0.009));
        let model = fit(&spec, &x, &y, names(4)).unwrap();
        let (_, gw, gb) = loss_and_grad(&model.weights, model.intercept, &x, &y, 0.009);
        let norm = (gw.iter().map(|g| g * g).sum::<f64>() + gb * gb).sqrt();
        assert!(norm < 1e-6, "gradient norm {norm}");
    }

    #[test]
    fn analytic_gradient_matches_finite_differences() {
        let (x, y) = random_problem(2, 40, 3);
        let mut rng = crate::seed::rng_from(9);
        for _ in 0..20 {
            let w: Vec<f64> = (0..3).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
            let b: f64 = rng.gen::<f64>() - 0.5;
            let (_, gw, gb) = loss_and_grad(&w, b, &x, &y, 0.5);
            let h = 1e-6;
            for j in 0..=3 {
                let mut wp = w.clone();
                let mut wm = w.clone();
                let (mut bp, mut bm) = (b, b);
                if j < 3 {
                    wp[j] += h;
                    wm[j] -= h;
                } else {
                    bp += h;
                    bm -= h;
                }
                let fd = (loss_and_grad(&wp, bp, &x, &y, 0.5).0
                    - loss_and_grad(&wm, bm, &x, &y, 0.5).0)
                    / (2.0 * h);
                let analytic = if j < 3 { gw[j] } else { gb };
                let denom = analytic.abs().max(1.0);
                assert!(
                    ((fd - analytic) / denom).abs() < 1e-5,
                    "param {j}: fd {fd} vs {analytic}"
                );
            }
        }
    }

    #[test]
    fn separable_data_orders_probabilities() {
        let x = vec![vec![0.0], vec![0.1], vec![0.9], vec![1.0]];
        let y = [false, false, true, true];
        let spec = ModelSpec::new(ModelFamily::LogisticRegression, 0);
        let model = fit(&spec, &x, &y, names(1)).unwrap();
        let p = model.predict_proba(&x);
        assert!(p[0] < 0.5 && p[3] > 0.5);
        assert!(p.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn single_class_is_rejected() {
        let x = vec![vec![0.0], vec![1.0]];
        let spec = ModelSpec::new(ModelFamily::LogisticRegression, 0);
        assert!(matches!(
            fit(&spec, &x, &[true, true], names(1)),
            Err(ModelError::SingleClassTraining)
        ));
    }

    #[test]
    fn training_is_deterministic() {
        let (x, y) = random_problem(5, 80, 4);
        let spec = ModelSpec::new(ModelFamily::LogisticRegression, 3);
        let a = fit(&spec, &x, &y, names(4)).unwrap();
        let b = fit(&spec, &x, &y, names(4)).unwrap();
        assert_eq!(a.weights, b.weights);
        assert_eq!(a.intercept, b.intercept);
    }
}
