//! The trainable model: scattering with a (possibly frozen) selection
//! matrix feeding a task head.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autograd::backward_theta;
use crate::error::{Error, Result};
use crate::graph::{Graph, SignalMatrix};
use crate::heads::{loss, FcnHead, LossSpec, RbfHead, Target};
use crate::legs::{init_theta, selection_matrix, InitScheme, SelectionMatrix, SelectionParams};
use crate::scattering::{transform, Bank, ForwardTrace, ScatteringConfig};

/// Model variants. The fixed variant freezes the selection at the exact
/// one-hot dyadic bank and trains only the head.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelVariant {
    #[serde(rename = "LEGS-FIXED")]
    LegsFixed,
    #[serde(rename = "LEGS-FCN")]
    LegsFcn,
    #[serde(rename = "LEGS-RBF")]
    LegsRbf,
}

/// Task head of a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Head {
    Fcn(FcnHead),
    Rbf(RbfHead),
}

impl Head {
    pub fn param_len(&self) -> usize {
        match self {
            Head::Fcn(h) => h.param_len(),
            Head::Rbf(h) => h.param_len(),
        }
    }

    pub fn params_flat(&self) -> Vec<f64> {
        match self {
            Head::Fcn(h) => h.params_flat(),
            Head::Rbf(h) => h.params_flat(),
        }
    }

    pub fn set_params(&mut self, flat: &[f64]) {
        match self {
            Head::Fcn(h) => h.set_params(flat),
            Head::Rbf(h) => h.set_params(flat),
        }
    }
}

/// Scattering transform plus head, with flat parameter access for the
/// optimizer. Selection logits come first in the flat layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatterModel {
    pub variant: ModelVariant,
    pub scattering: ScatteringConfig,
    /// Trainable selection logits; `None` when the bank is frozen.
    pub theta: Option<SelectionParams>,
    pub head: Head,
    pub loss_spec: LossSpec,
}

impl ScatterModel {
    pub fn new(
        variant: ModelVariant,
        scattering: ScatteringConfig,
        init: InitScheme,
        in_dim: usize,
        out_dim: usize,
        hidden: usize,
        anchors: usize,
        loss_spec: LossSpec,
        seed: u64,
    ) -> Result<Self> {
        scattering.validate()?;
        let theta = match variant {
            ModelVariant::LegsFixed => None,
            ModelVariant::LegsFcn | ModelVariant::LegsRbf => {
                Some(init_theta(scattering.j, scattering.m, init)?)
            }
        };
        let head = match variant {
            ModelVariant::LegsFixed | ModelVariant::LegsFcn => {
                Head::Fcn(FcnHead::new(in_dim, hidden, out_dim, seed))
            }
            ModelVariant::LegsRbf => Head::Rbf(RbfHead::new(in_dim, anchors, out_dim, seed)),
        };
        Ok(Self {
            variant,
            scattering,
            theta,
            head,
            loss_spec,
        })
    }

    /// Current selection matrix: softmax of the logits with per-pass row
    /// reordering, or the exact dyadic one-hot for the frozen variant.
    pub fn selection(&self) -> Result<SelectionMatrix> {
        match &self.theta {
            Some(theta) => selection_matrix(theta),
            None => Ok(SelectionMatrix::one_hot(&self.scattering.dyadic_bank()?)),
        }
    }

    pub fn trains_theta(&self) -> bool {
        self.theta.is_some()
    }

    pub fn theta_len(&self) -> usize {
        self.theta.as_ref().map_or(0, |t| t.theta.len())
    }

    pub fn param_len(&self) -> usize {
        self.theta_len() + self.head.param_len()
    }

    pub fn params_flat(&self) -> Vec<f64> {
        let mut p = self
            .theta
            .as_ref()
            .map(|t| t.theta.clone())
            .unwrap_or_default();
        p.extend(self.head.params_flat());
        p
    }

    pub fn set_params(&mut self, flat: &[f64]) {
        let tl = self.theta_len();
        if let Some(theta) = &mut self.theta {
            theta.theta.copy_from_slice(&flat[..tl]);
        }
        self.head.set_params(&flat[tl..]);
    }

    /// Features of one graph under the given selection.
    pub fn features(
        &self,
        selection: &SelectionMatrix,
        g: &Graph,
        x: &SignalMatrix,
        retain_trace: bool,
    ) -> Result<crate::scattering::ScatteringFeatures> {
        transform(g, x, Bank::Legs(selection), &self.scattering, retain_trace)
    }

    /// Feature vectors for a set of graphs, in order, without traces.
    pub fn features_batch(
        &self,
        selection: &SelectionMatrix,
        graphs: &[(&Graph, &SignalMatrix)],
    ) -> Result<Vec<Vec<f64>>> {
        graphs
            .par_iter()
            .map(|(g, x)| Ok(self.features(selection, g, x, false)?.values))
            .collect()
    }

    /// Eval-mode logits for one graph.
    pub fn predict_logits(
        &self,
        selection: &SelectionMatrix,
        g: &Graph,
        x: &SignalMatrix,
    ) -> Result<Vec<f64>> {
        let features = self.features(selection, g, x, false)?.values;
        match &self.head {
            Head::Fcn(h) => h.forward(&features),
            Head::Rbf(h) => h.forward_eval(&features),
        }
    }

    /// Eval-mode prediction: class index (ties to the lowest) or raw
    /// regression output.
    pub fn predict(
        &self,
        selection: &SelectionMatrix,
        g: &Graph,
        x: &SignalMatrix,
    ) -> Result<Target> {
        let logits = self.predict_logits(selection, g, x)?;
        Ok(match self.loss_spec.kind {
            crate::heads::LossKind::CrossEntropy => Target::Class(argmax_lowest(&logits)),
            crate::heads::LossKind::MeanSquaredError => Target::Regression(logits),
        })
    }

    /// Mean eval-mode loss over a set of graphs.
    pub fn mean_loss(
        &self,
        selection: &SelectionMatrix,
        items: &[(&Graph, &SignalMatrix, Target)],
    ) -> Result<f64> {
        if items.is_empty() {
            return Err(Error::EmptySplit { split: "eval" });
        }
        let losses: Vec<f64> = items
            .par_iter()
            .map(|(g, x, target)| {
                let logits = self.predict_logits(selection, g, x)?;
                Ok(loss(&self.loss_spec, &logits, target)?.0)
            })
            .collect::<Result<_>>()?;
        Ok(losses.iter().sum::<f64>() / losses.len() as f64)
    }

    /// One training batch: mean loss over the batch and the full flat
    /// gradient (selection logits then head parameters). Train mode for
    /// batch-norm heads.
    pub fn batch_loss_and_grad(
        &mut self,
        items: &[(&Graph, &SignalMatrix, Target)],
    ) -> Result<(f64, Vec<f64>)> {
        if items.is_empty() {
            return Err(Error::EmptySplit { split: "batch" });
        }
        let selection = self.selection()?;
        let retain = self.trains_theta();
        let forwards: Vec<(Vec<f64>, Option<ForwardTrace>)> = items
            .par_iter()
            .map(|(g, x, _)| {
                let f = self.features(&selection, g, x, retain)?;
                Ok((f.values, f.trace))
            })
            .collect::<Result<_>>()?;
        let batch = items.len();
        let scale = 1.0 / batch as f64;
        let alpha = self.scattering.alpha;

        // Head forward/backward; d_features per graph comes back for the
        // selection chain.
        let mut total_loss = 0.0;
        let mut d_head = vec![0.0; self.head.param_len()];
        let mut d_features_rows: Vec<Vec<f64>> = Vec::with_capacity(batch);
        match &mut self.head {
            Head::Fcn(h) => {
                for ((features, _), (_, _, target)) in forwards.iter().zip(items) {
                    let (logits, cache) = h.forward_cached(features)?;
                    let (value, mut d_logits) = loss(&self.loss_spec, &logits, target)?;
                    total_loss += value * scale;
                    d_logits.iter_mut().for_each(|v| *v *= scale);
                    let (d_params, d_x) = h.backward(&cache, &d_logits);
                    for (acc, d) in d_head.iter_mut().zip(&d_params) {
                        *acc += d;
                    }
                    d_features_rows.push(d_x);
                }
            }
            Head::Rbf(h) => {
                let feature_rows: Vec<Vec<f64>> =
                    forwards.iter().map(|(f, _)| f.clone()).collect();
                let (logits_rows, cache) = h.forward_train(&feature_rows)?;
                let mut d_logits_rows = Vec::with_capacity(batch);
                for (logits, (_, _, target)) in logits_rows.iter().zip(items) {
                    let (value, mut d_logits) = loss(&self.loss_spec, logits, target)?;
                    total_loss += value * scale;
                    d_logits.iter_mut().for_each(|v| *v *= scale);
                    d_logits_rows.push(d_logits);
                }
                let (d_params, d_x_rows) = h.backward_train(&cache, &d_logits_rows);
                d_head = d_params;
                d_features_rows = d_x_rows;
            }
        }

        // Selection gradient per graph, reduced in batch order.
        let mut d_theta = vec![0.0; self.theta_len()];
        if self.trains_theta() {
            let per_graph: Vec<Vec<f64>> = items
                .par_iter()
                .zip(&forwards)
                .zip(&d_features_rows)
                .map(|(((g, _, _), (_, trace)), d_features)| {
                    let trace = trace.as_ref().ok_or(Error::MissingCache)?;
                    backward_theta(g, alpha, trace, d_features)
                })
                .collect::<Result<_>>()?;
            for row in per_graph {
                for (acc, d) in d_theta.iter_mut().zip(&row) {
                    *acc += d;
                }
            }
        }
        d_theta.extend(d_head);
        Ok((total_loss, d_theta))
    }
}

/// First index attaining the maximum.
pub fn argmax_lowest(values: &[f64]) -> usize {
    let mut best = 0;
    for (k, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = k;
        }
    }
    best
}
