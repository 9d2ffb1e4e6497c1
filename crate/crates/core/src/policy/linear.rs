//! Multinomial logistic regression by full-batch gradient descent.
//!
//! Features are standardized internally (the scaler is part of the model);
//! the step size comes from the smoothness bound of the softmax loss, so
//! descent is monotone and no tuning knob is exposed.

use serde::{Deserialize, Serialize};

use crate::features::FEATURE_DIM;

/// Weights are `K x (FEATURE_DIM + 1)`; the last column is the bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<Vec<f64>>,
    pub feature_means: Vec<f64>,
    pub feature_scales: Vec<f64>,
}

impl LinearModel {
    /// Class scores for a raw feature row.
    pub fn scores(&self, row: &[f64]) -> Vec<f64> {
        let z: Vec<f64> = (0..FEATURE_DIM)
            .map(|j| (row[j] - self.feature_means[j]) / self.feature_scales[j])
            .collect();
        self.weights
            .iter()
            .map(|w| {
                let mut s = w[FEATURE_DIM];
                for j in 0..FEATURE_DIM {
                    s += w[j] * z[j];
                }
                s
            })
            .collect()
    }

    pub fn validate(&self, n_classes: usize) -> bool {
        self.weights.len() == n_classes
            && self.weights.iter().all(|w| w.len() == FEATURE_DIM + 1)
            && self.feature_means.len() == FEATURE_DIM
            && self.feature_scales.len() == FEATURE_DIM
            && self.feature_scales.iter().all(|&s| s.is_finite() && s > 0.0)
            && self
                .weights
                .iter()
                .flatten()
                .chain(self.feature_means.iter())
                .all(|v| v.is_finite())
    }
}

pub struct LinearFit {
    pub model: LinearModel,
    pub final_loss: f64,
    pub iterations: usize,
}

pub(crate) fn softmax_in_place(scores: &mut [f64]) {
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for s in scores.iter_mut() {
        *s = (*s - max).exp();
        sum += *s;
    }
    for s in scores.iter_mut() {
        *s /= sum;
    }
}

/// Train on a flat row-major matrix. `sample_weights` scale each row's loss
/// contribution (mean of weights is normalized out by the caller).
/// `l2` penalizes the non-bias weights, ridge style.
#[allow(clippy::too_many_arguments)]
pub fn fit_linear(
    data: &[f64],
    n_rows: usize,
    labels: &[usize],
    n_classes: usize,
    sample_weights: &[f64],
    max_iterations: usize,
    tolerance: f64,
    l2: f64,
) -> LinearFit {
    // standardize: z = (x - mean) / scale, scale 1 for constant columns
    let mut means = vec![0.0; FEATURE_DIM];
    let mut scales = vec![1.0; FEATURE_DIM];
    for j in 0..FEATURE_DIM {
        let mean = (0..n_rows).map(|i| data[i * FEATURE_DIM + j]).sum::<f64>() / n_rows as f64;
        let var = (0..n_rows)
            .map(|i| {
                let d = data[i * FEATURE_DIM + j] - mean;
                d * d
            })
            .sum::<f64>()
            / n_rows as f64;
        means[j] = mean;
        if var > 1e-24 {
            scales[j] = var.sqrt();
        }
    }
    let mut z = Vec::with_capacity(n_rows * FEATURE_DIM);
    for i in 0..n_rows {
        for j in 0..FEATURE_DIM {
            z.push((data[i * FEATURE_DIM + j] - means[j]) / scales[j]);
        }
    }

    let weight_sum: f64 = sample_weights.iter().sum();
    // Softmax smoothness: Hessian norm at most (1/2) * mean row norm
    // (bias included), scaled by the largest sample weight.
    let mean_sq_norm = (0..n_rows)
        .map(|i| {
            1.0 + (0..FEATURE_DIM)
                .map(|j| z[i * FEATURE_DIM + j].powi(2))
                .sum::<f64>()
        })
        .sum::<f64>()
        / n_rows as f64;
    let w_max = sample_weights.iter().cloned().fold(0.0f64, f64::max);
    let smoothness = 0.5 * mean_sq_norm * w_max.max(1.0) * n_rows as f64 / weight_sum + l2;
    let step = 1.0 / smoothness.max(1e-9);

    let mut weights = vec![vec![0.0; FEATURE_DIM + 1]; n_classes];
    let mut probs = vec![0.0; n_classes];
    let mut grad = vec![vec![0.0; FEATURE_DIM + 1]; n_classes];
    let mut loss = f64::INFINITY;
    let mut iterations = 0;

    for _ in 0..max_iterations {
        iterations += 1;
        for g in grad.iter_mut() {
            g.fill(0.0);
        }
        let mut total_loss = 0.0;
        for i in 0..n_rows {
            let zi = &z[i * FEATURE_DIM..(i + 1) * FEATURE_DIM];
            for (c, w) in weights.iter().enumerate() {
                let mut s = w[FEATURE_DIM];
                for j in 0..FEATURE_DIM {
                    s += w[j] * zi[j];
                }
                probs[c] = s;
            }
            softmax_in_place(&mut probs);
            let wi = sample_weights[i];
            total_loss -= wi * probs[labels[i]].max(1e-15).ln();
            for c in 0..n_classes {
                let coeff = wi * (probs[c] - if labels[i] == c { 1.0 } else { 0.0 });
                for j in 0..FEATURE_DIM {
                    grad[c][j] += coeff * zi[j];
                }
                grad[c][FEATURE_DIM] += coeff;
            }
        }
        // ridge term: bias column stays unpenalized
        for c in 0..n_classes {
            for j in 0..FEATURE_DIM {
                total_loss += 0.5 * l2 * weight_sum * weights[c][j] * weights[c][j];
                grad[c][j] += l2 * weight_sum * weights[c][j];
            }
        }
        loss = total_loss / weight_sum;

        let grad_inf = grad
            .iter()
            .flatten()
            .map(|g| (g / weight_sum).abs())
            .fold(0.0f64, f64::max);
        if grad_inf <= tolerance {
            break;
        }
        for c in 0..n_classes {
            for j in 0..=FEATURE_DIM {
                weights[c][j] -= step * grad[c][j] / weight_sum;
            }
        }
    }

    LinearFit {
        model: LinearModel {
            weights,
            feature_means: means,
            feature_scales: scales,
        },
        final_loss: loss,
        iterations,
    }
}
