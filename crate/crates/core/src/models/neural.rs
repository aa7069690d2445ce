//! Fully connected network: tanh hidden layers, sigmoid output, log-loss
//! with L2 weight decay, trained by full-batch Adam.
//!
//! Parameters live in one flat vector (per layer: row-major weights, then
//! biases), which keeps the optimizer and the finite-difference gradient
//! check straightforward. Loss follows the sklearn convention:
//! mean log-loss + alpha/(2n)·‖W‖², biases unpenalized.

use super::{sigmoid, ModelError, ModelSpec, ParamValue};
use crate::seed;
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NeuralModel {
    pub spec: ModelSpec,
    pub feature_names: Vec<String>,
    pub hidden_sizes: Vec<usize>,
    pub params: Vec<f64>,
    pub n_iterations: usize,
    pub final_loss: f64,
}

/// (input, output) size of each layer, input layer first.
pub fn layer_shapes(d: usize, hidden: &[usize]) -> Vec<(usize, usize)> {
    let mut sizes = vec![d];
    sizes.extend_from_slice(hidden);
    sizes.push(1);
    sizes.windows(2).map(|w| (w[0], w[1])).collect()
}

pub fn param_count(shapes: &[(usize, usize)]) -> usize {
    shapes.iter().map(|&(i, o)| i * o + o).sum()
}

fn forward(params: &[f64], shapes: &[(usize, usize)], x: &[f64]) -> (Vec<Vec<f64>>, f64) {
    let mut activations = vec![x.to_vec()];
    let mut offset = 0;
    let mut z_out = 0.0;
    for (l, &(n_in, n_out)) in shapes.iter().enumerate() {
        let w = &params[offset..offset + n_in * n_out];
        let b = &params[offset + n_in * n_out..offset + n_in * n_out + n_out];
        offset += n_in * n_out + n_out;
        let input = activations.last().unwrap().clone();
        let mut out = vec![0.0; n_out];
        for (j, o) in out.iter_mut().enumerate() {
            let mut z = b[j];
            for (i, v) in input.iter().enumerate() {
                z += w[j * n_in + i] * v;
            }
            if l + 1 == shapes.len() {
                z_out = z;
            } else {
                *o = z.tanh();
            }
        }
        if l + 1 < shapes.len() {
            activations.push(out);
        }
    }
    (activations, z_out)
}

/// Loss and gradient over the full batch at the given parameters.
pub fn loss_and_grad(
    params: &[f64],
    shapes: &[(usize, usize)],
    instances: &[Vec<f64>],
    labels: &[bool],
    alpha: f64,
) -> (f64, Vec<f64>) {
    let n = instances.len() as f64;
    let mut grad = vec![0.0; params.len()];
    let mut loss = 0.0;
    for (x, &y) in instances.iter().zip(labels) {
        let (activations, z) = forward(params, shapes, x);
        let p = sigmoid(z);
        let t = if y { 1.0 } else { 0.0 };
        loss += if z > 0.0 {
            z + (-z).exp().ln_1p() - t * z
        } else {
            z.exp().ln_1p() - t * z
        };
        // Backward pass; delta starts at d(logloss)/dz of the output unit.
        let mut delta = vec![(p - t) / n];
        let mut offset = params.len();
        for (l, &(n_in, n_out)) in shapes.iter().enumerate().rev() {
            offset -= n_in * n_out + n_out;
            let input = &activations[l];
            let w = &params[offset..offset + n_in * n_out];
            for j in 0..n_out {
                for i in 0..n_in {
                    grad[offset + j * n_in + i] += delta[j] * input[i];
                }
                grad[offset + n_in * n_out + j] += delta[j];
            }
            if l > 0 {
                let mut prev = vec![0.0; n_in];
                for (i, pd) in prev.iter_mut().enumerate() {
                    let mut sum = 0.0;
                    for j in 0..n_out {
                        sum += w[j * n_in + i] * delta[j];
                    }
                    // tanh'(z) = 1 - a².
                    *pd = sum * (1.0 - input[i] * input[i]);
                }
                delta = prev;
            }
        }
    }
    loss /= n;
    // L2 on weights only.
    let mut offset = 0;
    for &(n_in, n_out) in shapes {
        for k in 0..n_in * n_out {
            loss += alpha / (2.0 * n) * params[offset + k] * params[offset + k];
            grad[offset + k] += alpha / n * params[offset + k];
        }
        offset += n_in * n_out + n_out;
    }
    (loss, grad)
}

pub fn fit(
    spec: &ModelSpec,
    instances: &[Vec<f64>],
    labels: &[bool],
    feature_names: Vec<String>,
) -> Result<NeuralModel, ModelError> {
    if labels.iter().all(|&y| y) || labels.iter().all(|&y| !y) {
        return Err(ModelError::SingleClassTraining);
    }
    let hidden: Vec<usize> = match spec.hyperparameters.get("hidden_layer_sizes") {
        None => vec![100, 100],
        Some(ParamValue::IntList(sizes)) => sizes.iter().map(|&s| s as usize).collect(),
        Some(_) => unreachable!("validated"),
    };
    let alpha = spec.f64_param("alpha", 0.1)?;
    let lr = spec.f64_param("learning_rate_init", 0.01)?;
    let max_iter = spec.usize_param("max_iter", 1000)?;
    let tol = spec.f64_param("tol", 1e-4)?;

    let shapes = layer_shapes(feature_names.len(), &hidden);
    let mut params = vec![0.0; param_count(&shapes)];
    let mut offset = 0;
    for (l, &(n_in, n_out)) in shapes.iter().enumerate() {
        let mut rng = seed::rng(spec.seed, "neural-init", l as u64);
        let limit = (6.0 / (n_in + n_out) as f64).sqrt();
        for k in 0..n_in * n_out {
            params[offset + k] = rng.gen_range(-limit..limit);
        }
        offset += n_in * n_out + n_out;
    }

    let (beta1, beta2, eps): (f64, f64, f64) = (0.9, 0.999, 1e-8);
    let mut m = vec![0.0; params.len()];
    let mut v = vec![0.0; params.len()];
    let mut best_loss = f64::INFINITY;
    let mut stall = 0;
    let mut last_loss = f64::INFINITY;
    for it in 1..=max_iter {
        let (loss, grad) = loss_and_grad(&params, &shapes, instances, labels, alpha);
        last_loss = loss;
        if loss < best_loss - tol {
            best_loss = loss;
            stall = 0;
        } else {
            stall += 1;
            // sklearn's n_iter_no_change convention.
            if stall >= 10 {
                return Ok(NeuralModel {
                    spec: spec.clone(),
                    feature_names,
                    hidden_sizes: hidden,
                    params,
                    n_iterations: it,
                    final_loss: loss,
                });
            }
        }
        let b1t = 1.0 - beta1.powi(it as i32);
        let b2t = 1.0 - beta2.powi(it as i32);
        for k in 0..params.len() {
            m[k] = beta1 * m[k] + (1.0 - beta1) * grad[k];
            v[k] = beta2 * v[k] + (1.0 - beta2) * grad[k] * grad[k];
            params[k] -= lr * (m[k] / b1t) / ((v[k] / b2t).sqrt() + eps);
        }
    }
    Err(ModelError::NonConvergence { last_loss })
}

impl NeuralModel {
    pub fn predict_proba(&self, instances: &[Vec<f64>]) -> Vec<f64> {
        let shapes = layer_shapes(self.feature_names.len(), &self.hidden_sizes);
        instances
            .iter()
            .map(|x| sigmoid(forward(&self.params, &shapes, x).1))
            .collect()
    }
}
