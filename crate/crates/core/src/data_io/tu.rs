//! The plain-text multi-graph dataset layout used by the public
//! graph-classification benchmarks.
//!
//! `DS_A.txt` lists comma-separated 1-based node pairs (both directions of
//! every undirected edge); `DS_graph_indicator.txt` maps each node line to
//! its graph; `DS_graph_labels.txt` holds one label per graph. Node labels
//! and attributes are optional sidecars.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use super::{GraphDataset, Labels, NodeFeature};
use crate::error::{Error, Result};
use crate::graph::{build_graph, IsolatedPolicy};

/// Paths to the raw files of one dataset.
#[derive(Debug, Clone)]
pub struct TuRawFiles {
    pub adjacency: PathBuf,
    pub graph_indicator: PathBuf,
    pub graph_labels: PathBuf,
    pub node_labels: Option<PathBuf>,
    pub node_attributes: Option<PathBuf>,
}

impl TuRawFiles {
    /// Standard layout: `<dir>/<name>_A.txt` and friends.
    pub fn locate(dir: &Path, name: &str) -> Result<Self> {
        let file = |suffix: &str| dir.join(format!("{name}_{suffix}.txt"));
        let adjacency = file("A");
        let graph_indicator = file("graph_indicator");
        let graph_labels = file("graph_labels");
        for p in [&adjacency, &graph_indicator, &graph_labels] {
            if !p.exists() {
                return Err(Error::Io(format!("missing dataset file {}", p.display())));
            }
        }
        let optional = |suffix: &str| {
            let p = file(suffix);
            p.exists().then_some(p)
        };
        Ok(Self {
            adjacency,
            graph_indicator,
            graph_labels,
            node_labels: optional("node_labels"),
            node_attributes: optional("node_attributes"),
        })
    }
}

fn parse_error(file: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::ParseError {
        file: file.display().to_string(),
        line,
        message: message.into(),
    }
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    Ok(fs::read_to_string(path)?
        .lines()
        .map(str::to_string)
        .collect())
}

fn parse_int(path: &Path, line_no: usize, token: &str) -> Result<i64> {
    token
        .trim()
        .parse::<i64>()
        .map_err(|_| parse_error(path, line_no, format!("expected integer, got {token:?}")))
}

/// Parses the raw files into graphs with contiguous 0-based class labels
/// and the requested node features.
pub fn parse_tu(
    files: &TuRawFiles,
    isolated_policy: IsolatedPolicy,
    features: &[NodeFeature],
) -> Result<GraphDataset> {
    // Graph indicator: 1-based graph id per node.
    let indicator_lines = read_lines(&files.graph_indicator)?;
    let mut node_graph = Vec::with_capacity(indicator_lines.len());
    for (k, line) in indicator_lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let gid = parse_int(&files.graph_indicator, k + 1, line)?;
        if gid < 1 {
            return Err(Error::InconsistentIndicator {
                message: format!("graph id {gid} at line {} is not positive", k + 1),
            });
        }
        node_graph.push((gid - 1) as usize);
    }
    let total_nodes = node_graph.len();

    // Graph labels define the graph count.
    let label_lines = read_lines(&files.graph_labels)?;
    let mut raw_labels = Vec::new();
    for (k, line) in label_lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        raw_labels.push(parse_int(&files.graph_labels, k + 1, line)?);
    }
    let graph_count = raw_labels.len();
    if let Some(&g) = node_graph.iter().max() {
        if g >= graph_count {
            return Err(Error::InconsistentIndicator {
                message: format!(
                    "indicator references graph {} but only {graph_count} labels exist",
                    g + 1
                ),
            });
        }
    }

    // Local node numbering per graph, in file order.
    let mut nodes_of_graph: Vec<Vec<usize>> = vec![Vec::new(); graph_count];
    let mut local_of_node = vec![0usize; total_nodes];
    for (node, &g) in node_graph.iter().enumerate() {
        local_of_node[node] = nodes_of_graph[g].len();
        nodes_of_graph[g].push(node);
    }
    for (g, nodes) in nodes_of_graph.iter().enumerate() {
        if nodes.is_empty() {
            return Err(Error::InconsistentIndicator {
                message: format!("graph {} has no nodes", g + 1),
            });
        }
    }

    // Directed pairs; every undirected edge must appear in both directions.
    let adjacency_lines = read_lines(&files.adjacency)?;
    let mut directed: HashSet<(usize, usize)> = HashSet::new();
    for (k, line) in adjacency_lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split(',');
        let (Some(a), Some(b)) = (parts.next(), parts.next()) else {
            return Err(parse_error(
                &files.adjacency,
                k + 1,
                "expected two comma-separated node ids",
            ));
        };
        if parts.next().is_some() {
            return Err(parse_error(&files.adjacency, k + 1, "too many fields"));
        }
        let i = parse_int(&files.adjacency, k + 1, a)?;
        let j = parse_int(&files.adjacency, k + 1, b)?;
        if i < 1 || j < 1 || i as usize > total_nodes || j as usize > total_nodes {
            return Err(parse_error(
                &files.adjacency,
                k + 1,
                format!("node id out of range in ({i}, {j})"),
            ));
        }
        let (i, j) = ((i - 1) as usize, (j - 1) as usize);
        if i == j {
            return Err(parse_error(&files.adjacency, k + 1, "self-loop edge"));
        }
        if node_graph[i] != node_graph[j] {
            return Err(Error::InconsistentIndicator {
                message: format!(
                    "edge ({}, {}) crosses graphs {} and {}",
                    i + 1,
                    j + 1,
                    node_graph[i] + 1,
                    node_graph[j] + 1
                ),
            });
        }
        directed.insert((i, j));
    }
    let mut edges_of_graph: Vec<Vec<(usize, usize, f64)>> = vec![Vec::new(); graph_count];
    for &(i, j) in &directed {
        if !directed.contains(&(j, i)) {
            return Err(Error::AsymmetricEdgeList { i: i + 1, j: j + 1 });
        }
        if i < j {
            edges_of_graph[node_graph[i]].push((local_of_node[i], local_of_node[j], 1.0));
        }
    }

    let mut graphs = Vec::with_capacity(graph_count);
    for edges in &mut edges_of_graph {
        edges.sort_by_key(|&(i, j, _)| (i, j));
    }
    for (g, edges) in edges_of_graph.iter().enumerate() {
        graphs.push(build_graph(nodes_of_graph[g].len(), edges, isolated_policy)?);
    }

    // Remap labels to contiguous 0-based classes, sorted by raw value.
    let mut classes: Vec<i64> = raw_labels.clone();
    classes.sort_unstable();
    classes.dedup();
    let labels: Vec<usize> = raw_labels
        .iter()
        .map(|l| classes.binary_search(l).unwrap())
        .collect();

    // Optional per-node labels, one-hot encoded on request.
    let node_labels = match &files.node_labels {
        Some(path) if features.contains(&NodeFeature::NodeLabelOneHot) => {
            let lines = read_lines(path)?;
            let mut values = Vec::with_capacity(total_nodes);
            for (k, line) in lines.iter().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                values.push(parse_int(path, k + 1, line)?);
            }
            if values.len() != total_nodes {
                return Err(parse_error(
                    path,
                    values.len() + 1,
                    format!("expected {total_nodes} node labels, got {}", values.len()),
                ));
            }
            Some(values)
        }
        _ => None,
    };

    GraphDataset::from_parts_with_node_labels(
        files
            .adjacency
            .file_stem()
            .map(|s| s.to_string_lossy().trim_end_matches("_A").to_string())
            .unwrap_or_else(|| "dataset".to_string()),
        graphs,
        Labels::Classes {
            per_graph: labels,
            class_count: classes.len(),
        },
        features,
        node_labels.as_deref(),
        &nodes_of_graph,
    )
}

/// Writes a dataset back out in the raw text layout. Class labels are
/// written as stored (0-based), which re-parses to the identical dataset.
pub fn write_tu(dataset: &GraphDataset, dir: &Path, name: &str) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut adjacency = String::new();
    let mut indicator = String::new();
    let mut offset = 0usize;
    for (g, graph) in dataset.graphs.iter().enumerate() {
        let mut pairs: Vec<(usize, usize)> = Vec::new();
        for &(i, j, _) in graph.edges() {
            if i != j {
                pairs.push((offset + i + 1, offset + j + 1));
                pairs.push((offset + j + 1, offset + i + 1));
            }
        }
        pairs.sort_unstable();
        for (a, b) in pairs {
            adjacency.push_str(&format!("{a}, {b}\n"));
        }
        for _ in 0..graph.n() {
            indicator.push_str(&format!("{}\n", g + 1));
        }
        offset += graph.n();
    }
    let labels = match &dataset.labels {
        Labels::Classes { per_graph, .. } => per_graph
            .iter()
            .map(|l| format!("{l}\n"))
            .collect::<String>(),
        Labels::Targets { .. } => {
            return Err(Error::Io(
                "regression targets have no raw text representation".to_string(),
            ))
        }
    };
    fs::write(dir.join(format!("{name}_A.txt")), adjacency)?;
    fs::write(dir.join(format!("{name}_graph_indicator.txt")), indicator)?;
    fs::write(dir.join(format!("{name}_graph_labels.txt")), labels)?;
    Ok(())
}
