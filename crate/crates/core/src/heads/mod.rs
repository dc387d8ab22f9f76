//! Task heads over scattering features: a two-layer fully connected head
//! and a radial-basis head with batch normalization and data-initialized
//! movable anchors, plus the training losses.

mod batchnorm;

pub use batchnorm::{BatchNorm, BnCache};

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::substream;

/// Two fully connected layers with a rectifier between them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FcnHead {
    pub in_dim: usize,
    pub hidden: usize,
    pub out_dim: usize,
    /// Row-major `hidden x in_dim`.
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    /// Row-major `out_dim x hidden`.
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

pub const DEFAULT_FCN_HIDDEN: usize = 128;

fn glorot(rows: usize, cols: usize, rng: &mut impl Rng) -> Vec<f64> {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    (0..rows * cols)
        .map(|_| rng.random_range(-bound..bound))
        .collect()
}

/// Forward cache for the FCN backward pass.
#[derive(Debug, Clone)]
pub struct FcnCache {
    x: Vec<f64>,
    hidden_pre: Vec<f64>,
    hidden_post: Vec<f64>,
}

impl FcnHead {
    pub fn new(in_dim: usize, hidden: usize, out_dim: usize, seed: u64) -> Self {
        let mut rng = substream(seed, "fcn-init");
        Self {
            in_dim,
            hidden,
            out_dim,
            w1: glorot(hidden, in_dim, &mut rng),
            b1: vec![0.0; hidden],
            w2: glorot(out_dim, hidden, &mut rng),
            b2: vec![0.0; out_dim],
        }
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward_cached(x)?.0)
    }

    pub fn forward_cached(&self, x: &[f64]) -> Result<(Vec<f64>, FcnCache)> {
        if x.len() != self.in_dim {
            return Err(Error::ShapeMismatch {
                context: "fcn input",
                expected: self.in_dim,
                got: x.len(),
            });
        }
        let mut hidden_pre = self.b1.clone();
        for h in 0..self.hidden {
            let row = &self.w1[h * self.in_dim..(h + 1) * self.in_dim];
            hidden_pre[h] += row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
        }
        let hidden_post: Vec<f64> = hidden_pre.iter().map(|&v| v.max(0.0)).collect();
        let mut logits = self.b2.clone();
        for o in 0..self.out_dim {
            let row = &self.w2[o * self.hidden..(o + 1) * self.hidden];
            logits[o] += row.iter().zip(&hidden_post).map(|(w, v)| w * v).sum::<f64>();
        }
        Ok((
            logits,
            FcnCache {
                x: x.to_vec(),
                hidden_pre,
                hidden_post,
            },
        ))
    }

    /// Returns (parameter gradient in layout order, input gradient).
    pub fn backward(&self, cache: &FcnCache, d_logits: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut d_w1 = vec![0.0; self.w1.len()];
        let mut d_b1 = vec![0.0; self.hidden];
        let mut d_w2 = vec![0.0; self.w2.len()];
        let d_b2 = d_logits.to_vec();
        let mut d_hidden = vec![0.0; self.hidden];
        for o in 0..self.out_dim {
            for h in 0..self.hidden {
                d_w2[o * self.hidden + h] = d_logits[o] * cache.hidden_post[h];
                d_hidden[h] += d_logits[o] * self.w2[o * self.hidden + h];
            }
        }
        // Rectifier subgradient: zero at the kink.
        for h in 0..self.hidden {
            if cache.hidden_pre[h] <= 0.0 {
                d_hidden[h] = 0.0;
            }
        }
        let mut d_x = vec![0.0; self.in_dim];
        for h in 0..self.hidden {
            d_b1[h] = d_hidden[h];
            for i in 0..self.in_dim {
                d_w1[h * self.in_dim + i] = d_hidden[h] * cache.x[i];
                d_x[i] += d_hidden[h] * self.w1[h * self.in_dim + i];
            }
        }
        let mut params = d_w1;
        params.extend(d_b1);
        params.extend(d_w2);
        params.extend(d_b2);
        (params, d_x)
    }

    pub fn param_len(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + self.b2.len()
    }

    pub fn params_flat(&self) -> Vec<f64> {
        let mut p = self.w1.clone();
        p.extend(&self.b1);
        p.extend(&self.w2);
        p.extend(&self.b2);
        p
    }

    pub fn set_params(&mut self, flat: &[f64]) {
        let mut k = 0;
        for dst in [&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2] {
            let len = dst.len();
            dst.copy_from_slice(&flat[k..k + len]);
            k += len;
        }
    }
}

/// Radial-basis head: batch norm, Gaussian activations against movable
/// anchor points initialized from data, and a linear readout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RbfHead {
    pub bn: BatchNorm,
    pub in_dim: usize,
    pub k: usize,
    pub out_dim: usize,
    /// Row-major `k x in_dim`; meaningful once `initialized`.
    pub anchors: Vec<f64>,
    /// Row-major `out_dim x k`.
    pub wo: Vec<f64>,
    pub bo: Vec<f64>,
    pub initialized: bool,
}

pub const DEFAULT_RBF_ANCHORS: usize = 64;

/// Forward cache for the RBF backward pass (one batch).
#[derive(Debug, Clone)]
pub struct RbfCache {
    bn_cache: BnCache,
    z: Vec<Vec<f64>>,
    activations: Vec<Vec<f64>>,
}

impl RbfHead {
    pub fn new(in_dim: usize, k: usize, out_dim: usize, seed: u64) -> Self {
        let mut rng = substream(seed, "rbf-init");
        Self {
            bn: BatchNorm::new(in_dim),
            in_dim,
            k,
            out_dim,
            anchors: vec![0.0; k * in_dim],
            wo: glorot(out_dim, k, &mut rng),
            bo: vec![0.0; out_dim],
            initialized: false,
        }
    }

    /// Picks the anchors as `k` distinct batch-normalized rows of the first
    /// pass through the data (seeded, without replacement). Also seeds the
    /// running statistics via the train-mode normalization.
    pub fn init_anchors(&mut self, first_pass_features: &[Vec<f64>], seed: u64) -> Result<()> {
        if self.initialized {
            return Err(Error::AlreadyInitialized);
        }
        if first_pass_features.len() < self.k {
            return Err(Error::BatchTooSmall {
                needed: self.k,
                got: first_pass_features.len(),
            });
        }
        let (normalized, _) = self.bn.forward_train(first_pass_features);
        let mut rng = substream(seed, "anchors");
        let chosen = sample(&mut rng, normalized.len(), self.k);
        for (a, row_idx) in chosen.iter().enumerate() {
            self.anchors[a * self.in_dim..(a + 1) * self.in_dim]
                .copy_from_slice(&normalized[row_idx]);
        }
        self.initialized = true;
        Ok(())
    }

    fn activations_of(&self, z: &[f64]) -> Vec<f64> {
        (0..self.k)
            .map(|a| {
                let anchor = &self.anchors[a * self.in_dim..(a + 1) * self.in_dim];
                let dist_sq: f64 = z
                    .iter()
                    .zip(anchor)
                    .map(|(zi, ci)| (zi - ci) * (zi - ci))
                    .sum();
                (-dist_sq).exp()
            })
            .collect()
    }

    fn readout(&self, activations: &[f64]) -> Vec<f64> {
        let mut logits = self.bo.clone();
        for o in 0..self.out_dim {
            let row = &self.wo[o * self.k..(o + 1) * self.k];
            logits[o] += row.iter().zip(activations).map(|(w, a)| w * a).sum::<f64>();
        }
        logits
    }

    pub fn forward_eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        if !self.initialized {
            return Err(Error::AnchorsNotInitialized);
        }
        if x.len() != self.in_dim {
            return Err(Error::ShapeMismatch {
                context: "rbf input",
                expected: self.in_dim,
                got: x.len(),
            });
        }
        let z = self.bn.forward_eval(x);
        Ok(self.readout(&self.activations_of(&z)))
    }

    /// Train-mode forward over one batch; updates running statistics.
    pub fn forward_train(&mut self, batch: &[Vec<f64>]) -> Result<(Vec<Vec<f64>>, RbfCache)> {
        if !self.initialized {
            return Err(Error::AnchorsNotInitialized);
        }
        let (z, bn_cache) = self.bn.forward_train(batch);
        let activations: Vec<Vec<f64>> = z.iter().map(|row| self.activations_of(row)).collect();
        let logits = activations.iter().map(|a| self.readout(a)).collect();
        Ok((
            logits,
            RbfCache {
                bn_cache,
                z,
                activations,
            },
        ))
    }

    /// Returns (parameter gradient, per-row input gradients).
    pub fn backward_train(
        &self,
        cache: &RbfCache,
        d_logits: &[Vec<f64>],
    ) -> (Vec<f64>, Vec<Vec<f64>>) {
        let mut d_anchors = vec![0.0; self.anchors.len()];
        let mut d_wo = vec![0.0; self.wo.len()];
        let mut d_bo = vec![0.0; self.out_dim];
        let mut d_z_batch = Vec::with_capacity(d_logits.len());
        for (row, (z, acts)) in d_logits
            .iter()
            .zip(cache.z.iter().zip(&cache.activations))
        {
            let mut d_act = vec![0.0; self.k];
            for o in 0..self.out_dim {
                d_bo[o] += row[o];
                for a in 0..self.k {
                    d_wo[o * self.k + a] += row[o] * acts[a];
                    d_act[a] += row[o] * self.wo[o * self.k + a];
                }
            }
            let mut d_z = vec![0.0; self.in_dim];
            for a in 0..self.k {
                let anchor = &self.anchors[a * self.in_dim..(a + 1) * self.in_dim];
                let scale = d_act[a] * acts[a] * 2.0;
                for f in 0..self.in_dim {
                    let diff = z[f] - anchor[f];
                    d_z[f] -= scale * diff;
                    d_anchors[a * self.in_dim + f] += scale * diff;
                }
            }
            d_z_batch.push(d_z);
        }
        let (d_gamma, d_beta, d_x) = self.bn.backward_train(&cache.bn_cache, &d_z_batch);
        let mut params = d_gamma;
        params.extend(d_beta);
        params.extend(d_anchors);
        params.extend(d_wo);
        params.extend(d_bo);
        (params, d_x)
    }

    /// Eval-mode backward for a single input (deterministic gradient checks).
    pub fn backward_eval(&self, x: &[f64], d_logits: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let z = self.bn.forward_eval(x);
        let acts = self.activations_of(&z);
        let mut d_anchors = vec![0.0; self.anchors.len()];
        let mut d_wo = vec![0.0; self.wo.len()];
        let mut d_bo = vec![0.0; self.out_dim];
        let mut d_act = vec![0.0; self.k];
        for o in 0..self.out_dim {
            d_bo[o] += d_logits[o];
            for a in 0..self.k {
                d_wo[o * self.k + a] += d_logits[o] * acts[a];
                d_act[a] += d_logits[o] * self.wo[o * self.k + a];
            }
        }
        let mut d_z = vec![0.0; self.in_dim];
        for a in 0..self.k {
            let anchor = &self.anchors[a * self.in_dim..(a + 1) * self.in_dim];
            let scale = d_act[a] * acts[a] * 2.0;
            for f in 0..self.in_dim {
                let diff = z[f] - anchor[f];
                d_z[f] -= scale * diff;
                d_anchors[a * self.in_dim + f] += scale * diff;
            }
        }
        let (d_gamma, d_beta, d_x) = self.bn.backward_eval(x, &d_z);
        let mut params = d_gamma;
        params.extend(d_beta);
        params.extend(d_anchors);
        params.extend(d_wo);
        params.extend(d_bo);
        (params, d_x)
    }

    pub fn param_len(&self) -> usize {
        2 * self.bn.dim + self.anchors.len() + self.wo.len() + self.bo.len()
    }

    pub fn params_flat(&self) -> Vec<f64> {
        let mut p = self.bn.gamma.clone();
        p.extend(&self.bn.beta);
        p.extend(&self.anchors);
        p.extend(&self.wo);
        p.extend(&self.bo);
        p
    }

    pub fn set_params(&mut self, flat: &[f64]) {
        let mut k = 0;
        for dst in [
            &mut self.bn.gamma,
            &mut self.bn.beta,
            &mut self.anchors,
            &mut self.wo,
            &mut self.bo,
        ] {
            let len = dst.len();
            dst.copy_from_slice(&flat[k..k + len]);
            k += len;
        }
    }
}

/// Loss kinds supported by the trainer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    CrossEntropy,
    MeanSquaredError,
}

/// Loss contract: kind plus the expected logit width.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LossSpec {
    pub kind: LossKind,
    /// Class count for cross-entropy, target dimension for MSE.
    pub width: usize,
}

/// Ground truth for one graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Target {
    Class(usize),
    Regression(Vec<f64>),
}

/// Evaluates the loss and its logit adjoint.
///
/// Cross-entropy is computed through a log-sum-exp stabilization; the MSE
/// averages squared error over the target dimensions.
pub fn loss(spec: &LossSpec, logits: &[f64], target: &Target) -> Result<(f64, Vec<f64>)> {
    if logits.len() != spec.width {
        return Err(Error::ShapeMismatch {
            context: "logit width",
            expected: spec.width,
            got: logits.len(),
        });
    }
    match (spec.kind, target) {
        (LossKind::CrossEntropy, Target::Class(y)) => {
            if *y >= logits.len() {
                return Err(Error::LabelOutOfRange {
                    label: *y,
                    classes: logits.len(),
                });
            }
            let max = logits.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
            let sum: f64 = logits.iter().map(|v| (v - max).exp()).sum();
            let lse = max + sum.ln();
            let value = lse - logits[*y];
            let mut d: Vec<f64> = logits.iter().map(|v| (v - lse).exp()).collect();
            d[*y] -= 1.0;
            Ok((value, d))
        }
        (LossKind::MeanSquaredError, Target::Regression(t)) => {
            if t.len() != logits.len() {
                return Err(Error::ShapeMismatch {
                    context: "regression target width",
                    expected: logits.len(),
                    got: t.len(),
                });
            }
            let dim = logits.len() as f64;
            let value = logits
                .iter()
                .zip(t)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                / dim;
            let d = logits.iter().zip(t).map(|(a, b)| 2.0 * (a - b) / dim).collect();
            Ok((value, d))
        }
        _ => Err(Error::ShapeMismatch {
            context: "loss kind vs target kind",
            expected: spec.width,
            got: logits.len(),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autograd::fd_check;

    #[test]
    fn zero_weight_fcn_returns_bias() {
        let mut head = FcnHead::new(3, 4, 2, 0);
        head.w1.iter_mut().for_each(|v| *v = 0.0);
        head.w2.iter_mut().for_each(|v| *v = 0.0);
        head.b2 = vec![0.5, -1.5];
        let out = head.forward(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(out, vec![0.5, -1.5]);
    }

    #[test]
    fn rectifier_kills_negative_identity_chain() {
        let mut head = FcnHead::new(1, 1, 1, 0);
        head.w1 = vec![1.0];
        head.b1 = vec![0.0];
        head.w2 = vec![1.0];
        head.b2 = vec![0.0];
        assert_eq!(head.forward(&[-2.0]).unwrap(), vec![0.0]);
        assert_eq!(head.forward(&[2.0]).unwrap(), vec![2.0]);
    }

    #[test]
    fn fcn_gradient_matches_fd() {
        let head = FcnHead::new(4, 5, 3, 11);
        let x = [0.3, -0.8, 1.2, 0.05];
        let spec = LossSpec {
            kind: LossKind::CrossEntropy,
            width: 3,
        };
        let target = Target::Class(1);
        let (logits, cache) = head.forward_cached(&x).unwrap();
        let (_, d_logits) = loss(&spec, &logits, &target).unwrap();
        let (analytic, _) = head.backward(&cache, &d_logits);

        let p0 = head.params_flat();
        let f = |p: &[f64]| {
            let mut h = head.clone();
            h.set_params(p);
            let l = h.forward(&x).unwrap();
            loss(&spec, &l, &target).unwrap().0
        };
        let err = fd_check(f, &p0, 1e-6, &analytic);
        assert!(err <= 1e-6, "relative error {err}");
    }

    #[test]
    fn anchors_are_batch_rows_and_seeded() {
        let mut head = RbfHead::new(2, 4, 2, 0);
        let batch: Vec<Vec<f64>> = (0..100)
            .map(|i| vec![i as f64, (i as f64) * 0.5 - 10.0])
            .collect();
        head.init_anchors(&batch, 9).unwrap();
        let (normalized, _) = {
            let mut bn = BatchNorm::new(2);
            bn.forward_train(&batch)
        };
        for a in 0..4 {
            let anchor = &head.anchors[a * 2..(a + 1) * 2];
            assert!(
                normalized.iter().any(|row| row
                    .iter()
                    .zip(anchor)
                    .all(|(x, y)| (x - y).abs() <= 1e-12)),
                "anchor {a} is not a batch row"
            );
        }

        let mut head2 = RbfHead::new(2, 4, 2, 0);
        head2.init_anchors(&batch, 9).unwrap();
        assert_eq!(head.anchors, head2.anchors);

        assert_eq!(head.init_anchors(&batch, 9).unwrap_err(), Error::AlreadyInitialized);
        let mut small = RbfHead::new(2, 4, 2, 0);
        assert_eq!(
            small.init_anchors(&batch[..3], 9).unwrap_err(),
            Error::BatchTooSmall { needed: 4, got: 3 }
        );
    }

    #[test]
    fn exact_anchor_hit_activates_to_one() {
        let mut head = RbfHead::new(2, 1, 1, 0);
        head.anchors = vec![0.7, -0.3];
        head.initialized = true;
        let acts = head.activations_of(&[0.7, -0.3]);
        assert_eq!(acts[0], 1.0);
        // Monotone decay with distance.
        let near = head.activations_of(&[0.8, -0.3])[0];
        let far = head.activations_of(&[2.0, -0.3])[0];
        assert!(near < 1.0 && far < near && far > 0.0);
    }

    #[test]
    fn rbf_eval_gradient_matches_fd() {
        let mut head = RbfHead::new(3, 4, 2, 5);
        let batch: Vec<Vec<f64>> = (0..12)
            .map(|i| {
                vec![
                    (i as f64 * 0.7).sin(),
                    (i as f64 * 0.3).cos() * 2.0,
                    i as f64 * 0.1,
                ]
            })
            .collect();
        head.init_anchors(&batch, 3).unwrap();
        let x = [0.4, -0.9, 0.2];
        let spec = LossSpec {
            kind: LossKind::CrossEntropy,
            width: 2,
        };
        let target = Target::Class(0);
        let logits = head.forward_eval(&x).unwrap();
        let (_, d_logits) = loss(&spec, &logits, &target).unwrap();
        let (analytic, _) = head.backward_eval(&x, &d_logits);

        let p0 = head.params_flat();
        let f = |p: &[f64]| {
            let mut h = head.clone();
            h.set_params(p);
            let l = h.forward_eval(&x).unwrap();
            loss(&spec, &l, &target).unwrap().0
        };
        let err = fd_check(f, &p0, 1e-5, &analytic);
        assert!(err <= 1e-4, "relative error {err}");
    }

    #[test]
    fn cross_entropy_examples() {
        let spec = LossSpec {
            kind: LossKind::CrossEntropy,
            width: 4,
        };
        let (v, _) = loss(&spec, &[0.3, 0.3, 0.3, 0.3], &Target::Class(2)).unwrap();
        assert!((v - 4.0f64.ln()).abs() <= 1e-12);
        assert!(v >= 0.0);
        assert_eq!(
            loss(&spec, &[0.0; 4], &Target::Class(4)).unwrap_err(),
            Error::LabelOutOfRange { label: 4, classes: 4 }
        );
    }

    #[test]
    fn mse_examples_and_fd() {
        let spec = LossSpec {
            kind: LossKind::MeanSquaredError,
            width: 3,
        };
        let t = Target::Regression(vec![1.0, -2.0, 0.5]);
        let (v, _) = loss(&spec, &[1.0, -2.0, 0.5], &t).unwrap();
        assert_eq!(v, 0.0);

        let logits = [0.2, 0.9, -1.4];
        let (_, d) = loss(&spec, &logits, &t).unwrap();
        let f = |p: &[f64]| loss(&spec, p, &t).unwrap().0;
        assert!(fd_check(f, &logits, 1e-6, &d) <= 1e-8);
    }

    #[test]
    fn ce_dlogits_matches_fd() {
        let spec = LossSpec {
            kind: LossKind::CrossEntropy,
            width: 3,
        };
        let t = Target::Class(2);
        let logits = [0.5, -1.0, 0.25];
        let (_, d) = loss(&spec, &logits, &t).unwrap();
        let f = |p: &[f64]| loss(&spec, p, &t).unwrap().0;
        assert!(fd_check(f, &logits, 1e-6, &d) <= 1e-8);
    }
}
