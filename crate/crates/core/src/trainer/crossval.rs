//! Stratified k-fold cross-validation with majority-vote ensembling.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{metrics, train_with, MetricKind, ScatterModel, TrainConfig};
use crate::data_io::{GraphDataset, Labels, WhitenStats};
use crate::error::{Error, Result};
use crate::heads::{LossKind, Target};
use crate::rng::{mix, substream_indexed};

/// Disjoint, exhaustive folds with sizes differing by at most one,
/// stratified by class for classification datasets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvPlan {
    pub folds: Vec<Vec<usize>>,
}

pub fn cv_plan(labels: &Labels, fold_count: usize, seed: u64) -> Result<CvPlan> {
    let n = labels.len();
    if n < fold_count {
        return Err(Error::DatasetTooSmall {
            size: n,
            folds: fold_count,
        });
    }
    // Group indices by class (one group for regression), shuffle each
    // group, then deal round-robin through a global counter.
    let groups: Vec<Vec<usize>> = match labels {
        Labels::Classes {
            per_graph,
            class_count,
        } => {
            let mut groups = vec![Vec::new(); *class_count];
            for (i, &c) in per_graph.iter().enumerate() {
                groups[c].push(i);
            }
            groups
        }
        Labels::Targets { per_graph, .. } => vec![(0..per_graph.len()).collect()],
    };
    let mut folds = vec![Vec::new(); fold_count];
    let mut counter = 0usize;
    for (gi, group) in groups.into_iter().enumerate() {
        let mut group = group;
        use rand::seq::SliceRandom;
        group.shuffle(&mut substream_indexed(seed, "folds", gi as u64));
        for idx in group {
            folds[counter % fold_count].push(idx);
            counter += 1;
        }
    }
    for fold in &mut folds {
        fold.sort_unstable();
    }
    Ok(CvPlan { folds })
}

/// Cross-validation settings on top of a training configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossvalConfig {
    pub train: TrainConfig,
    pub fold_count: usize,
    /// One model per test fold instead of the full nine-model ensemble.
    pub fast: bool,
    /// Fraction of each training split actually used (stratified subsample);
    /// 1.0 uses everything.
    pub train_fraction: f64,
    /// Whiten regression targets per fold on the non-test portion.
    pub whiten: bool,
}

impl CrossvalConfig {
    pub fn new(train: TrainConfig) -> Self {
        Self {
            train,
            fold_count: 10,
            fast: false,
            train_fraction: 1.0,
            whiten: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldOutcome {
    pub fold: usize,
    pub score: f64,
    pub models_trained: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossvalOutcome {
    pub per_fold: Vec<FoldOutcome>,
    pub mean: f64,
    pub std: f64,
    pub metric: MetricKind,
}

/// Stratified subsample of `fraction` of the indices, deterministic in the
/// stream key.
fn subsample(indices: &[usize], labels: &Labels, fraction: f64, seed: u64, key: u64) -> Vec<usize> {
    if fraction >= 1.0 {
        return indices.to_vec();
    }
    let groups: Vec<Vec<usize>> = match labels {
        Labels::Classes {
            per_graph,
            class_count,
        } => {
            let mut groups = vec![Vec::new(); *class_count];
            for &i in indices {
                groups[per_graph[i]].push(i);
            }
            groups
        }
        Labels::Targets { .. } => vec![indices.to_vec()],
    };
    let mut out = Vec::new();
    for (gi, mut group) in groups.into_iter().enumerate() {
        use rand::seq::SliceRandom;
        group.shuffle(&mut substream_indexed(
            mix(seed, &[key]),
            "subsample",
            gi as u64,
        ));
        let keep = ((group.len() as f64 * fraction).ceil() as usize).max(1);
        group.truncate(keep.min(group.len()));
        out.extend(group);
    }
    out.sort_unstable();
    out
}

fn majority_vote(votes: &[usize], class_count: usize) -> usize {
    let mut counts = vec![0usize; class_count];
    for &v in votes {
        counts[v] += 1;
    }
    let mut best = 0;
    for (c, &k) in counts.iter().enumerate() {
        if k > counts[best] {
            best = c;
        }
    }
    best
}

/// Runs k-fold cross-validation. For every test fold the remaining folds
/// supply validation sets: one (`fast`) or all of them, with test
/// predictions ensembled by majority vote (classification) or mean
/// (regression). Returns per-fold scores and their mean and standard
/// deviation.
pub fn crossval(dataset: &GraphDataset, cfg: &CrossvalConfig) -> Result<CrossvalOutcome> {
    if dataset.len() < cfg.fold_count {
        return Err(Error::DatasetTooSmall {
            size: dataset.len(),
            folds: cfg.fold_count,
        });
    }
    let plan = cv_plan(&dataset.labels, cfg.fold_count, cfg.train.seed)?;
    let metric = match loss_kind(dataset) {
        LossKind::CrossEntropy => MetricKind::Accuracy,
        LossKind::MeanSquaredError => MetricKind::Mse,
    };

    let per_fold: Vec<FoldOutcome> = (0..cfg.fold_count)
        .into_par_iter()
        .map(|test_fold| run_fold(dataset, cfg, &plan, test_fold, metric))
        .collect::<Result<_>>()?;

    let mean = per_fold.iter().map(|f| f.score).sum::<f64>() / per_fold.len() as f64;
    let var = per_fold
        .iter()
        .map(|f| (f.score - mean) * (f.score - mean))
        .sum::<f64>()
        / per_fold.len() as f64;
    Ok(CrossvalOutcome {
        per_fold,
        mean,
        std: var.sqrt(),
        metric,
    })
}

fn loss_kind(dataset: &GraphDataset) -> LossKind {
    match &dataset.labels {
        Labels::Classes { .. } => LossKind::CrossEntropy,
        Labels::Targets { .. } => LossKind::MeanSquaredError,
    }
}

fn run_fold(
    dataset: &GraphDataset,
    cfg: &CrossvalConfig,
    plan: &CvPlan,
    test_fold: usize,
    metric: MetricKind,
) -> Result<FoldOutcome> {
    let folds = cfg.fold_count;
    let test_idx = &plan.folds[test_fold];
    let val_folds: Vec<usize> = if cfg.fast {
        vec![(test_fold + 1) % folds]
    } else {
        (0..folds).filter(|&f| f != test_fold).collect()
    };

    // Whitening statistics come from everything outside the test fold.
    let whiten_stats: Option<WhitenStats> = if cfg.whiten {
        let Labels::Targets { per_graph, .. } = &dataset.labels else {
            return Err(Error::Io("whitening needs regression targets".to_string()));
        };
        let rest: Vec<Vec<f64>> = (0..dataset.len())
            .filter(|i| !test_idx.contains(i))
            .map(|i| per_graph[i].clone())
            .collect();
        Some(WhitenStats::fit(&rest)?)
    } else {
        None
    };
    let target_map = |i: usize| -> Target {
        let t = dataset.labels.target(i);
        match (&whiten_stats, t) {
            (Some(stats), Target::Regression(v)) => Target::Regression(stats.apply(&v)),
            (_, t) => t,
        }
    };

    // One prediction list per trained model.
    let mut model_predictions: Vec<Vec<Target>> = Vec::with_capacity(val_folds.len());
    for &val_fold in &val_folds {
        let val_idx = &plan.folds[val_fold];
        let train_idx: Vec<usize> = (0..folds)
            .filter(|&f| f != test_fold && f != val_fold)
            .flat_map(|f| plan.folds[f].iter().copied())
            .collect();
        let train_idx = subsample(
            &train_idx,
            &dataset.labels,
            cfg.train_fraction,
            cfg.train.seed,
            (test_fold * folds + val_fold) as u64,
        );
        let mut train_cfg = cfg.train.clone();
        train_cfg.seed = mix(cfg.train.seed, &[test_fold as u64, val_fold as u64]);
        let outcome = train_with(
            dataset,
            &train_idx,
            val_idx,
            &train_cfg,
            Some(&target_map),
            None,
        )?;
        let model: &ScatterModel = &outcome.best.model;
        let selection = model.selection()?;
        let preds: Vec<Target> = test_idx
            .iter()
            .map(|&i| model.predict(&selection, &dataset.graphs[i], &dataset.node_features[i]))
            .collect::<Result<_>>()?;
        model_predictions.push(preds);
    }

    // Ensemble across models: majority vote with ties to the lowest class,
    // mean for regression.
    let ensembled: Vec<Target> = (0..test_idx.len())
        .map(|k| match metric {
            MetricKind::Accuracy => {
                let votes: Vec<usize> = model_predictions
                    .iter()
                    .map(|p| match &p[k] {
                        Target::Class(c) => *c,
                        Target::Regression(_) => unreachable!("classification ensemble"),
                    })
                    .collect();
                let class_count = dataset.class_count().expect("classification dataset");
                Target::Class(majority_vote(&votes, class_count))
            }
            MetricKind::Mse => {
                let dim = match &model_predictions[0][k] {
                    Target::Regression(v) => v.len(),
                    Target::Class(_) => unreachable!("regression ensemble"),
                };
                let mut mean = vec![0.0; dim];
                for p in &model_predictions {
                    let Target::Regression(v) = &p[k] else {
                        unreachable!()
                    };
                    for (m, x) in mean.iter_mut().zip(v) {
                        *m += x / model_predictions.len() as f64;
                    }
                }
                Target::Regression(mean)
            }
        })
        .collect();

    let truth: Vec<Target> = test_idx.iter().map(|&i| target_map(i)).collect();
    let score = metrics(&ensembled, &truth, metric)?;
    Ok(FoldOutcome {
        fold: test_fold,
        score,
        models_trained: val_folds.len(),
    })
}
