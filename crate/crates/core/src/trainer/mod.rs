//! Optimization loop with early stopping, checkpointing, and
//! cross-validation.

mod adam;
mod crossval;
mod model;

pub use adam::{adam_step, AdamState};
pub use crossval::{crossval, cv_plan, CrossvalConfig, CrossvalOutcome, CvPlan, FoldOutcome};
pub use model::{argmax_lowest, Head, ModelVariant, ScatterModel};

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data_io::GraphDataset;
use crate::error::{Error, Result};
use crate::heads::{LossKind, LossSpec, Target};
use crate::legs::InitScheme;
use crate::rng::{stable_hash_hex, substream};
use crate::scattering::ScatteringConfig;

/// Training hyperparameters. Defaults: Adam at 1e-4, up to 1000 epochs,
/// early stopping after 100 stagnant epochs checking every 10, batches
/// of 32.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr: f64,
    pub max_epochs: usize,
    pub patience_epochs: usize,
    pub eval_every: usize,
    pub batch_size: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub seed: u64,
    pub variant: ModelVariant,
    pub init: InitScheme,
    pub hidden: usize,
    pub anchors: usize,
    pub scattering: ScatteringConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            max_epochs: 1000,
            patience_epochs: 100,
            eval_every: 10,
            batch_size: 32,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            seed: 0,
            variant: ModelVariant::LegsFcn,
            init: InitScheme::DyadicWarm,
            hidden: crate::heads::DEFAULT_FCN_HIDDEN,
            anchors: crate::heads::DEFAULT_RBF_ANCHORS,
            scattering: ScatteringConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        assert!(self.lr > 0.0, "learning rate must be positive");
        assert!(self.eval_every >= 1, "eval_every must be at least 1");
        assert!(
            self.patience_epochs <= self.max_epochs,
            "patience exceeds max epochs"
        );
        assert!(
            self.patience_epochs % self.eval_every == 0,
            "eval_every must divide patience"
        );
        assert!(self.batch_size >= 1, "batch size must be at least 1");
        self.scattering.validate()
    }

    pub fn config_hash(&self) -> String {
        stable_hash_hex(&serde_json::to_string(self).expect("config serializes"))
    }
}

/// One line of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
}

/// Resumable training snapshot. `model` is the state at `epoch`;
/// `best_model` rides along on "latest" snapshots so a resumed run tracks
/// the same best checkpoint as an uninterrupted one.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub config_hash: String,
    pub epoch: usize,
    pub best_val_loss: f64,
    pub best_epoch: usize,
    pub model: ScatterModel,
    pub best_model: Option<Box<ScatterModel>>,
    pub adam: AdamState,
    pub batching_rng: ChaCha8Rng,
}

pub const CHECKPOINT_VERSION: u32 = 1;

/// Result of a training run.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Snapshot at the best validation loss.
    pub best: Checkpoint,
    /// Snapshot at the final epoch, resumable.
    pub last: Checkpoint,
    pub history: Vec<EpochRecord>,
}

/// Pure early-stopping bookkeeping: strictly-improving validation losses
/// reset the clock; `patience` stagnant epochs end the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EarlyStopper {
    pub patience: usize,
    pub best: f64,
    pub best_epoch: usize,
}

impl EarlyStopper {
    pub fn new(patience: usize) -> Self {
        Self {
            patience,
            best: f64::INFINITY,
            best_epoch: 0,
        }
    }

    /// Records an evaluation; returns (improved, should_stop).
    pub fn observe(&mut self, epoch: usize, val_loss: f64) -> (bool, bool) {
        let improved = val_loss < self.best;
        if improved {
            self.best = val_loss;
            self.best_epoch = epoch;
        }
        (improved, epoch - self.best_epoch >= self.patience)
    }
}

fn loss_spec_for(dataset: &GraphDataset) -> LossSpec {
    match &dataset.labels {
        crate::data_io::Labels::Classes { class_count, .. } => LossSpec {
            kind: LossKind::CrossEntropy,
            width: *class_count,
        },
        crate::data_io::Labels::Targets { dim, .. } => LossSpec {
            kind: LossKind::MeanSquaredError,
            width: *dim,
        },
    }
}

type Item<'a> = (
    &'a crate::graph::Graph,
    &'a crate::graph::SignalMatrix,
    Target,
);

fn items_of<'a>(
    dataset: &'a GraphDataset,
    indices: &[usize],
    target_map: &dyn Fn(usize) -> Target,
) -> Vec<Item<'a>> {
    indices
        .iter()
        .map(|&i| (&dataset.graphs[i], &dataset.node_features[i], target_map(i)))
        .collect()
}

/// Trains on `train_idx` with early stopping against `val_idx`.
pub fn train(
    dataset: &GraphDataset,
    train_idx: &[usize],
    val_idx: &[usize],
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    train_with(dataset, train_idx, val_idx, cfg, None, None)
}

/// Training entry point with optional target remapping (whitening) and
/// resume-from-checkpoint.
pub fn train_with(
    dataset: &GraphDataset,
    train_idx: &[usize],
    val_idx: &[usize],
    cfg: &TrainConfig,
    target_map: Option<&dyn Fn(usize) -> Target>,
    resume: Option<&Checkpoint>,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train_idx.is_empty() {
        return Err(Error::EmptySplit { split: "train" });
    }
    if val_idx.is_empty() {
        return Err(Error::EmptySplit { split: "validation" });
    }
    debug_assert!(
        train_idx.iter().all(|i| !val_idx.contains(i)),
        "train/val overlap"
    );
    let default_map = |i: usize| dataset.labels.target(i);
    let target_map: &dyn Fn(usize) -> Target = match target_map {
        Some(f) => f,
        None => &default_map,
    };
    let train_items = items_of(dataset, train_idx, target_map);
    let val_items = items_of(dataset, val_idx, target_map);

    let loss_spec = loss_spec_for(dataset);
    let channels = dataset.node_features[0].channels();
    let in_dim = cfg.scattering.features_per_channel()? * channels;

    let (mut model, mut adam, mut rng, start_epoch, mut stopper, mut best_model) = match resume {
        Some(ckpt) => (
            ckpt.model.clone(),
            ckpt.adam.clone(),
            ckpt.batching_rng.clone(),
            ckpt.epoch + 1,
            EarlyStopper {
                patience: cfg.patience_epochs,
                best: ckpt.best_val_loss,
                best_epoch: ckpt.best_epoch,
            },
            ckpt.best_model
                .as_deref()
                .cloned()
                .unwrap_or_else(|| ckpt.model.clone()),
        ),
        None => {
            let mut model = ScatterModel::new(
                cfg.variant,
                cfg.scattering.clone(),
                cfg.init,
                in_dim,
                loss_spec.width,
                cfg.hidden,
                cfg.anchors,
                loss_spec,
                cfg.seed,
            )?;
            // Anchor initialization: first pass over the training data.
            if let Head::Rbf(rbf) = &mut model.head {
                let selection = match &model.theta {
                    Some(t) => crate::legs::selection_matrix(t)?,
                    None => crate::legs::SelectionMatrix::one_hot(
                        &cfg.scattering.dyadic_bank()?,
                    ),
                };
                let pairs: Vec<(&crate::graph::Graph, &crate::graph::SignalMatrix)> =
                    train_items.iter().map(|(g, x, _)| (*g, *x)).collect();
                let rows: Vec<Vec<f64>> = pairs
                    .iter()
                    .map(|(g, x)| {
                        Ok(crate::scattering::transform(
                            g,
                            x,
                            crate::scattering::Bank::Legs(&selection),
                            &cfg.scattering,
                            false,
                        )?
                        .values)
                    })
                    .collect::<Result<_>>()?;
                rbf.init_anchors(&rows, crate::rng::mix(cfg.seed, &[0xa2c8]))?;
            }
            let adam = AdamState::new(model.param_len(), cfg.beta1, cfg.beta2, cfg.eps);
            let rng = substream(cfg.seed, "batching");
            let best_model = model.clone();
            (
                model,
                adam,
                rng,
                1,
                EarlyStopper::new(cfg.patience_epochs),
                best_model,
            )
        }
    };

    let config_hash = cfg.config_hash();
    let mut history = Vec::new();
    let mut shuffled: Vec<usize> = (0..train_items.len()).collect();
    let mut last_epoch = start_epoch.saturating_sub(1);

    for epoch in start_epoch..=cfg.max_epochs {
        last_epoch = epoch;
        shuffled.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        for chunk in shuffled.chunks(cfg.batch_size) {
            let batch: Vec<Item<'_>> = chunk
                .iter()
                .map(|&k| {
                    let (g, x, t) = &train_items[k];
                    (*g, *x, t.clone())
                })
                .collect();
            let (loss_value, grads) = model.batch_loss_and_grad(&batch)?;
            let mut params = model.params_flat();
            adam_step(&mut params, &grads, &mut adam, cfg.lr)?;
            model.set_params(&params);
            epoch_loss += loss_value;
            batches += 1;
        }
        let train_loss = epoch_loss / batches.max(1) as f64;

        let mut val_loss = None;
        let mut stop = false;
        if epoch % cfg.eval_every == 0 {
            let selection = model.selection()?;
            let v = model.mean_loss(&selection, &val_items)?;
            val_loss = Some(v);
            let (improved, should_stop) = stopper.observe(epoch, v);
            if improved {
                best_model = model.clone();
            }
            stop = should_stop;
        }
        history.push(EpochRecord {
            epoch,
            train_loss,
            val_loss,
        });
        if stop {
            break;
        }
    }

    let best = Checkpoint {
        version: CHECKPOINT_VERSION,
        config_hash: config_hash.clone(),
        epoch: stopper.best_epoch,
        best_val_loss: stopper.best,
        best_epoch: stopper.best_epoch,
        model: best_model.clone(),
        best_model: None,
        adam: adam.clone(),
        batching_rng: rng.clone(),
    };
    let last = Checkpoint {
        version: CHECKPOINT_VERSION,
        config_hash,
        epoch: last_epoch,
        best_val_loss: stopper.best,
        best_epoch: stopper.best_epoch,
        model,
        best_model: Some(Box::new(best_model)),
        adam,
        batching_rng: rng,
    };
    Ok(TrainOutcome {
        best,
        last,
        history,
    })
}

/// Metric families for evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    Accuracy,
    Mse,
}

/// Classification accuracy or mean squared error over paired predictions
/// and targets.
pub fn metrics(predictions: &[Target], targets: &[Target], kind: MetricKind) -> Result<f64> {
    if predictions.len() != targets.len() {
        return Err(Error::LengthMismatch {
            context: "predictions vs targets",
            a: predictions.len(),
            b: targets.len(),
        });
    }
    assert!(!predictions.is_empty(), "no predictions to score");
    match kind {
        MetricKind::Accuracy => {
            let correct = predictions
                .iter()
                .zip(targets)
                .filter(|(p, t)| p == t)
                .count();
            Ok(correct as f64 / predictions.len() as f64)
        }
        MetricKind::Mse => {
            let mut total = 0.0;
            for (p, t) in predictions.iter().zip(targets) {
                let (Target::Regression(p), Target::Regression(t)) = (p, t) else {
                    return Err(Error::LengthMismatch {
                        context: "regression metric on non-regression targets",
                        a: 0,
                        b: 0,
                    });
                };
                let dim = t.len() as f64;
                total += p
                    .iter()
                    .zip(t)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    / dim;
            }
            Ok(total / predictions.len() as f64)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn early_stopper_constant_loss_stops_at_patience_plus_first_eval() {
        let mut stopper = EarlyStopper::new(100);
        let mut stopped_at = None;
        for epoch in (10..=2000).step_by(10) {
            let (_, stop) = stopper.observe(epoch, 1.0);
            if stop {
                stopped_at = Some(epoch);
                break;
            }
        }
        assert_eq!(stopped_at, Some(110));
        assert_eq!(stopper.best_epoch, 10);
    }

    #[test]
    fn early_stopper_resets_on_improvement() {
        let mut stopper = EarlyStopper::new(20);
        assert_eq!(stopper.observe(10, 1.0), (true, false));
        assert_eq!(stopper.observe(20, 0.9), (true, false));
        assert_eq!(stopper.observe(30, 0.9), (false, false));
        let (_, stop) = stopper.observe(40, 0.95);
        assert!(stop); // 40 - 20 >= 20
    }

    #[test]
    fn metric_examples() {
        let preds = vec![Target::Class(0), Target::Class(1), Target::Class(1)];
        let targets = vec![Target::Class(0), Target::Class(1), Target::Class(0)];
        let acc = metrics(&preds, &targets, MetricKind::Accuracy).unwrap();
        assert!((acc - 2.0 / 3.0).abs() <= 1e-15);

        let p = vec![Target::Regression(vec![1.0, 2.0])];
        let t = vec![Target::Regression(vec![1.0, 2.0])];
        assert_eq!(metrics(&p, &t, MetricKind::Mse).unwrap(), 0.0);

        assert_eq!(
            metrics(&preds[..2], &targets, MetricKind::Accuracy).unwrap_err(),
            Error::LengthMismatch {
                context: "predictions vs targets",
                a: 2,
                b: 3
            }
        );
    }

    #[test]
    fn half_correct_of_ten() {
        let preds: Vec<Target> = (0..10).map(|k| Target::Class(k % 2)).collect();
        let targets: Vec<Target> = (0..10).map(|_| Target::Class(0)).collect();
        let acc = metrics(&preds, &targets, MetricKind::Accuracy).unwrap();
        assert!((acc - 0.5).abs() <= 1e-15);
    }
}
