//! Dataset ingestion, structural node features, synthetic generators, and
//! target whitening.

mod generators;
mod stats;
mod tu;

pub use generators::{
    barbell_graph, cycle_graph, er_graph, gen_synthetic, path_graph, random_tree, SyntheticKind,
};
pub use stats::{clustering_coefficient, eccentricity};
pub use tu::{parse_tu, write_tu, TuRawFiles};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, SignalMatrix};
use crate::heads::Target;

/// Node feature channels attachable to a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeFeature {
    Eccentricity,
    Clustering,
    /// Constant one per node; useful when structure alone should drive
    /// the features.
    Ones,
    /// One-hot encoding of categorical node labels, when the dataset
    /// provides them.
    NodeLabelOneHot,
}

/// Ground-truth labels for a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Labels {
    Classes {
        per_graph: Vec<usize>,
        class_count: usize,
    },
    Targets {
        per_graph: Vec<Vec<f64>>,
        dim: usize,
    },
}

impl Labels {
    pub fn len(&self) -> usize {
        match self {
            Labels::Classes { per_graph, .. } => per_graph.len(),
            Labels::Targets { per_graph, .. } => per_graph.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn target(&self, idx: usize) -> Target {
        match self {
            Labels::Classes { per_graph, .. } => Target::Class(per_graph[idx]),
            Labels::Targets { per_graph, .. } => Target::Regression(per_graph[idx].clone()),
        }
    }
}

/// A multi-graph dataset with per-graph node features and labels.
#[derive(Debug, Clone)]
pub struct GraphDataset {
    pub name: String,
    pub graphs: Vec<Graph>,
    pub node_features: Vec<SignalMatrix>,
    pub labels: Labels,
    pub feature_spec: Vec<NodeFeature>,
}

impl GraphDataset {
    pub fn from_parts(
        name: String,
        graphs: Vec<Graph>,
        labels: Labels,
        features: &[NodeFeature],
    ) -> Result<Self> {
        Self::from_parts_with_node_labels(name, graphs, labels, features, None, &[])
    }

    pub(crate) fn from_parts_with_node_labels(
        name: String,
        graphs: Vec<Graph>,
        labels: Labels,
        features: &[NodeFeature],
        node_labels: Option<&[i64]>,
        nodes_of_graph: &[Vec<usize>],
    ) -> Result<Self> {
        if labels.len() != graphs.len() {
            return Err(Error::LengthMismatch {
                context: "graphs vs labels",
                a: graphs.len(),
                b: labels.len(),
            });
        }
        // Distinct node-label values across the whole dataset fix the
        // one-hot width.
        let label_values: Option<Vec<i64>> = node_labels.map(|all| {
            let mut v: Vec<i64> = all.to_vec();
            v.sort_unstable();
            v.dedup();
            v
        });
        let node_features = graphs
            .iter()
            .enumerate()
            .map(|(g_idx, g)| {
                let per_node_labels = match (node_labels, label_values.as_ref()) {
                    (Some(all), Some(values)) => {
                        let local: Vec<usize> = nodes_of_graph[g_idx]
                            .iter()
                            .map(|&node| values.binary_search(&all[node]).unwrap())
                            .collect();
                        Some((local, values.len()))
                    }
                    _ => None,
                };
                compute_node_features(g, features, per_node_labels.as_ref())
            })
            .collect::<Result<Vec<_>>>()?;
        for f in &node_features {
            if !f.is_finite() {
                return Err(Error::NonFiniteParameter { position: 0 });
            }
        }
        Ok(Self {
            name,
            graphs,
            node_features,
            labels,
            feature_spec: features.to_vec(),
        })
    }

    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }

    pub fn class_count(&self) -> Option<usize> {
        match &self.labels {
            Labels::Classes { class_count, .. } => Some(*class_count),
            Labels::Targets { .. } => None,
        }
    }

    /// JSON manifest: name, counts, feature spec.
    pub fn manifest_json(&self) -> serde_json::Value {
        let label_info = match &self.labels {
            Labels::Classes { class_count, .. } => serde_json::json!({
                "kind": "classes",
                "class_count": class_count,
            }),
            Labels::Targets { dim, .. } => serde_json::json!({
                "kind": "targets",
                "dim": dim,
            }),
        };
        serde_json::json!({
            "name": self.name,
            "graph_count": self.graphs.len(),
            "node_counts": {
                "min": self.graphs.iter().map(Graph::n).min().unwrap_or(0),
                "max": self.graphs.iter().map(Graph::n).max().unwrap_or(0),
                "mean": if self.graphs.is_empty() { 0.0 } else {
                    self.graphs.iter().map(Graph::n).sum::<usize>() as f64
                        / self.graphs.len() as f64
                },
            },
            "labels": label_info,
            "feature_spec": self.feature_spec,
        })
    }
}

fn compute_node_features(
    g: &Graph,
    features: &[NodeFeature],
    node_labels: Option<&(Vec<usize>, usize)>,
) -> Result<SignalMatrix> {
    let mut columns: Vec<Vec<f64>> = Vec::new();
    for f in features {
        match f {
            NodeFeature::Eccentricity => columns.push(eccentricity(g)),
            NodeFeature::Clustering => columns.push(clustering_coefficient(g)),
            NodeFeature::Ones => columns.push(vec![1.0; g.n()]),
            NodeFeature::NodeLabelOneHot => {
                let Some((local, width)) = node_labels else {
                    return Err(Error::Io(
                        "node labels requested but the dataset has none".to_string(),
                    ));
                };
                for class in 0..*width {
                    columns.push(
                        local
                            .iter()
                            .map(|&l| if l == class { 1.0 } else { 0.0 })
                            .collect(),
                    );
                }
            }
        }
    }
    SignalMatrix::from_columns(&columns)
}

/// Per-dimension whitening statistics (population standard deviation).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WhitenStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl WhitenStats {
    /// Fits on a set of targets; errors on any zero-variance dimension.
    pub fn fit(targets: &[Vec<f64>]) -> Result<Self> {
        assert!(!targets.is_empty(), "no targets to whiten");
        let dim = targets[0].len();
        let n = targets.len() as f64;
        let mut mean = vec![0.0; dim];
        for t in targets {
            for (m, v) in mean.iter_mut().zip(t) {
                *m += v;
            }
        }
        for m in &mut mean {
            *m /= n;
        }
        let mut var = vec![0.0; dim];
        for t in targets {
            for d in 0..dim {
                let x = t[d] - mean[d];
                var[d] += x * x;
            }
        }
        let mut std = vec![0.0; dim];
        for d in 0..dim {
            var[d] /= n;
            if var[d] <= 1e-24 {
                return Err(Error::ZeroVarianceTarget { dim: d });
            }
            std[d] = var[d].sqrt();
        }
        Ok(Self { mean, std })
    }

    pub fn apply(&self, target: &[f64]) -> Vec<f64> {
        target
            .iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }
}

/// Whitens regression targets to zero mean and unit standard deviation over
/// the given dataset, returning the stats for reporting in whitened units.
pub fn whiten_targets(dataset: &GraphDataset) -> Result<(GraphDataset, WhitenStats)> {
    let Labels::Targets { per_graph, dim } = &dataset.labels else {
        return Err(Error::Io("dataset has no regression targets".to_string()));
    };
    let stats = WhitenStats::fit(per_graph)?;
    let whitened: Vec<Vec<f64>> = per_graph.iter().map(|t| stats.apply(t)).collect();
    let mut out = dataset.clone();
    out.labels = Labels::Targets {
        per_graph: whitened,
        dim: *dim,
    };
    Ok((out, stats))
}
