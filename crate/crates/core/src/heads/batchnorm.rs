//! Per-feature batch normalization with running statistics.

use serde::{Deserialize, Serialize};

/// Batch normalization state. Train mode normalizes with batch statistics
/// and updates the running ones; eval mode uses the running statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchNorm {
    pub dim: usize,
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    pub eps: f64,
    pub momentum: f64,
}

/// Cache from a train-mode forward, consumed by the backward pass.
#[derive(Debug, Clone)]
pub struct BnCache {
    /// Normalized inputs before gamma/beta, one row per batch element.
    pub x_hat: Vec<Vec<f64>>,
    /// Per-feature 1/sqrt(var + eps) of the batch.
    pub inv_std: Vec<f64>,
}

impl BatchNorm {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            gamma: vec![1.0; dim],
            beta: vec![0.0; dim],
            running_mean: vec![0.0; dim],
            running_var: vec![1.0; dim],
            eps: 1e-5,
            momentum: 0.1,
        }
    }

    /// Normalizes a batch with its own statistics, updates the running
    /// statistics, and returns the outputs plus the backward cache.
    pub fn forward_train(&mut self, batch: &[Vec<f64>]) -> (Vec<Vec<f64>>, BnCache) {
        let b = batch.len();
        assert!(b > 0, "empty batch");
        let bf = b as f64;
        let mut mean = vec![0.0; self.dim];
        for row in batch {
            for (m, &v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        for m in &mut mean {
            *m /= bf;
        }
        let mut var = vec![0.0; self.dim];
        for row in batch {
            for f in 0..self.dim {
                let d = row[f] - mean[f];
                var[f] += d * d;
            }
        }
        for v in &mut var {
            *v /= bf;
        }

        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + self.eps).sqrt()).collect();
        let mut x_hat = Vec::with_capacity(b);
        let mut out = Vec::with_capacity(b);
        for row in batch {
            let xh: Vec<f64> = (0..self.dim)
                .map(|f| (row[f] - mean[f]) * inv_std[f])
                .collect();
            out.push(
                (0..self.dim)
                    .map(|f| self.gamma[f] * xh[f] + self.beta[f])
                    .collect(),
            );
            x_hat.push(xh);
        }

        // Running variance uses the unbiased estimate when possible.
        let unbias = if b > 1 { bf / (bf - 1.0) } else { 1.0 };
        for f in 0..self.dim {
            self.running_mean[f] =
                (1.0 - self.momentum) * self.running_mean[f] + self.momentum * mean[f];
            self.running_var[f] =
                (1.0 - self.momentum) * self.running_var[f] + self.momentum * var[f] * unbias;
        }

        (out, BnCache { x_hat, inv_std })
    }

    pub fn forward_eval(&self, x: &[f64]) -> Vec<f64> {
        (0..self.dim)
            .map(|f| {
                let xh = (x[f] - self.running_mean[f]) / (self.running_var[f] + self.eps).sqrt();
                self.gamma[f] * xh + self.beta[f]
            })
            .collect()
    }

    /// Train-mode backward through the batch statistics.
    /// Returns (d_gamma, d_beta, d_inputs).
    pub fn backward_train(
        &self,
        cache: &BnCache,
        d_out: &[Vec<f64>],
    ) -> (Vec<f64>, Vec<f64>, Vec<Vec<f64>>) {
        let b = d_out.len();
        let bf = b as f64;
        let mut d_gamma = vec![0.0; self.dim];
        let mut d_beta = vec![0.0; self.dim];
        for (row, xh) in d_out.iter().zip(&cache.x_hat) {
            for f in 0..self.dim {
                d_gamma[f] += row[f] * xh[f];
                d_beta[f] += row[f];
            }
        }
        // d_xhat = d_out * gamma; dx = inv_std/B * (B*d_xhat - sum(d_xhat)
        //            - x_hat * sum(d_xhat * x_hat))
        let mut sum_dxh = vec![0.0; self.dim];
        let mut sum_dxh_xh = vec![0.0; self.dim];
        for (row, xh) in d_out.iter().zip(&cache.x_hat) {
            for f in 0..self.dim {
                let dxh = row[f] * self.gamma[f];
                sum_dxh[f] += dxh;
                sum_dxh_xh[f] += dxh * xh[f];
            }
        }
        let d_x: Vec<Vec<f64>> = d_out
            .iter()
            .zip(&cache.x_hat)
            .map(|(row, xh)| {
                (0..self.dim)
                    .map(|f| {
                        let dxh = row[f] * self.gamma[f];
                        cache.inv_std[f] / bf * (bf * dxh - sum_dxh[f] - xh[f] * sum_dxh_xh[f])
                    })
                    .collect()
            })
            .collect();
        (d_gamma, d_beta, d_x)
    }

    /// Eval-mode backward: running statistics are constants.
    pub fn backward_eval(&self, x: &[f64], d_out: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let mut d_gamma = vec![0.0; self.dim];
        let mut d_beta = vec![0.0; self.dim];
        let mut d_x = vec![0.0; self.dim];
        for f in 0..self.dim {
            let inv = 1.0 / (self.running_var[f] + self.eps).sqrt();
            let xh = (x[f] - self.running_mean[f]) * inv;
            d_gamma[f] += d_out[f] * xh;
            d_beta[f] += d_out[f];
            d_x[f] = d_out[f] * self.gamma[f] * inv;
        }
        (d_gamma, d_beta, d_x)
    }
}
