//! Seed-deterministic synthetic graphs and two-class datasets.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{GraphDataset, Labels, NodeFeature};
use crate::error::{Error, Result};
use crate::graph::{build_graph, Graph, IsolatedPolicy};
use crate::rng::substream;

pub fn cycle_graph(n: usize) -> Graph {
    let edges: Vec<(usize, usize, f64)> = (0..n).map(|i| (i, (i + 1) % n, 1.0)).collect();
    let edges: Vec<_> = edges
        .into_iter()
        .map(|(i, j, w)| if i < j { (i, j, w) } else { (j, i, w) })
        .collect();
    build_graph(n, &edges, IsolatedPolicy::Reject).expect("cycle is well-formed")
}

pub fn path_graph(n: usize) -> Graph {
    let edges: Vec<(usize, usize, f64)> = (0..n - 1).map(|i| (i, i + 1, 1.0)).collect();
    build_graph(n, &edges, IsolatedPolicy::Reject).expect("path is well-formed")
}

/// Uniform random labelled tree via a random Pruefer sequence.
pub fn random_tree(n: usize, rng: &mut ChaCha8Rng) -> Graph {
    assert!(n >= 2);
    if n == 2 {
        return build_graph(2, &[(0, 1, 1.0)], IsolatedPolicy::Reject).unwrap();
    }
    let pruefer: Vec<usize> = (0..n - 2).map(|_| rng.random_range(0..n)).collect();
    let mut degree = vec![1usize; n];
    for &v in &pruefer {
        degree[v] += 1;
    }
    let mut edges = Vec::with_capacity(n - 1);
    let mut leaf_heap: std::collections::BinaryHeap<std::cmp::Reverse<usize>> = (0..n)
        .filter(|&v| degree[v] == 1)
        .map(std::cmp::Reverse)
        .collect();
    for &v in &pruefer {
        let std::cmp::Reverse(leaf) = leaf_heap.pop().expect("tree invariant");
        edges.push((leaf.min(v), leaf.max(v), 1.0));
        degree[leaf] -= 1;
        degree[v] -= 1;
        if degree[v] == 1 {
            leaf_heap.push(std::cmp::Reverse(v));
        }
    }
    let std::cmp::Reverse(a) = leaf_heap.pop().unwrap();
    let std::cmp::Reverse(b) = leaf_heap.pop().unwrap();
    edges.push((a.min(b), a.max(b), 1.0));
    build_graph(n, &edges, IsolatedPolicy::Reject).expect("tree is well-formed")
}

/// Erdos-Renyi graph; isolated nodes receive self-loops.
pub fn er_graph(n: usize, p: f64, rng: &mut ChaCha8Rng) -> Graph {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random::<f64>() < p {
                edges.push((i, j, 1.0));
            }
        }
    }
    build_graph(n, &edges, IsolatedPolicy::SelfLoop).expect("er is well-formed")
}

/// Two cliques of size `s` joined by a path of `bridge_len` edges.
pub fn barbell_graph(s: usize, bridge_len: usize) -> Graph {
    assert!(s >= 2);
    let bridge_nodes = bridge_len.saturating_sub(1);
    let n = 2 * s + bridge_nodes;
    let mut edges = Vec::new();
    for block in 0..2 {
        let base = block * s;
        for i in 0..s {
            for j in i + 1..s {
                edges.push((base + i, base + j, 1.0));
            }
        }
    }
    // Chain from node 0 of clique A to node s of clique B.
    let mut chain = vec![0usize];
    chain.extend((0..bridge_nodes).map(|k| 2 * s + k));
    chain.push(s);
    for pair in chain.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        edges.push((a.min(b), a.max(b), 1.0));
    }
    build_graph(n, &edges, IsolatedPolicy::Reject).expect("barbell is well-formed")
}

/// Synthetic dataset families for desk-scale experiments.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SyntheticKind {
    /// Cycles (class 0) against uniform random trees (class 1).
    CycleVsTree,
    /// Erdos-Renyi graphs at two densities.
    ErDensity { p1: f64, p2: f64 },
    /// Two dense communities joined by a long bridge (class 0) or a short
    /// one (class 1); classes differ mainly at large diffusion scales.
    LongrangePair,
}

const LONG_BRIDGE: usize = 8;
const SHORT_BRIDGE: usize = 2;

/// Generates a balanced two-class dataset. `size_range` bounds the node
/// count per sampled unit (whole graph for the first two kinds, community
/// size for the long-range pair).
pub fn gen_synthetic(
    kind: SyntheticKind,
    count: usize,
    size_range: (usize, usize),
    seed: u64,
) -> Result<GraphDataset> {
    assert!(count % 2 == 0, "count must be even for balanced classes");
    let (lo, hi) = size_range;
    if lo < 4 || hi < lo {
        return Err(Error::InvalidSizeRange { lo, hi });
    }
    let mut rng = substream(seed, "synthetic");
    let mut graphs = Vec::with_capacity(count);
    let mut labels = Vec::with_capacity(count);
    for k in 0..count {
        let size = rng.random_range(lo..=hi);
        let class = k % 2;
        let g = match kind {
            SyntheticKind::CycleVsTree => {
                if class == 0 {
                    cycle_graph(size)
                } else {
                    random_tree(size, &mut rng)
                }
            }
            SyntheticKind::ErDensity { p1, p2 } => {
                let p = if class == 0 { p1 } else { p2 };
                er_graph(size, p, &mut rng)
            }
            SyntheticKind::LongrangePair => {
                let bridge = if class == 0 { LONG_BRIDGE } else { SHORT_BRIDGE };
                community_pair(size, bridge, &mut rng)
            }
        };
        graphs.push(g);
        labels.push(class);
    }
    let name = match kind {
        SyntheticKind::CycleVsTree => "cycle_vs_tree",
        SyntheticKind::ErDensity { .. } => "er_density",
        SyntheticKind::LongrangePair => "longrange_pair",
    };
    GraphDataset::from_parts(
        name.to_string(),
        graphs,
        Labels::Classes {
            per_graph: labels,
            class_count: 2,
        },
        &[NodeFeature::Eccentricity, NodeFeature::Clustering],
    )
}

/// Two dense ER communities of `s` nodes joined by a path of `bridge`
/// edges between their first nodes.
fn community_pair(s: usize, bridge: usize, rng: &mut ChaCha8Rng) -> Graph {
    let bridge_nodes = bridge.saturating_sub(1);
    let n = 2 * s + bridge_nodes;
    let mut edges = Vec::new();
    for block in 0..2 {
        let base = block * s;
        // Ring plus random chords keeps each community connected and dense.
        for i in 0..s {
            let j = (i + 1) % s;
            let (a, b) = (base + i.min(j), base + i.max(j));
            edges.push((a, b, 1.0));
        }
        for i in 0..s {
            for j in i + 2..s {
                if (i, j) != (0, s - 1) && rng.random::<f64>() < 0.5 {
                    edges.push((base + i, base + j, 1.0));
                }
            }
        }
    }
    let mut chain = vec![0usize];
    chain.extend((0..bridge_nodes).map(|k| 2 * s + k));
    chain.push(s);
    for pair in chain.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        edges.push((a.min(b), a.max(b), 1.0));
    }
    build_graph(n, &edges, IsolatedPolicy::Reject).expect("community pair is well-formed")
}
