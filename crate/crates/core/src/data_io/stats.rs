//! Structural node features: eccentricity and clustering coefficient.
//!
//! Both operate on the binarized adjacency with self-loops ignored, so
//! weighted graphs get combinatorial features.

use std::collections::VecDeque;

use crate::graph::Graph;

/// Per-node maximum BFS distance within the node's connected component.
pub fn eccentricity(g: &Graph) -> Vec<f64> {
    let n = g.n();
    let mut out = vec![0.0; n];
    let mut dist = vec![usize::MAX; n];
    let mut queue = VecDeque::new();
    for start in 0..n {
        dist.fill(usize::MAX);
        dist[start] = 0;
        queue.clear();
        queue.push_back(start);
        let mut far = 0usize;
        while let Some(u) = queue.pop_front() {
            for (v, _) in g.neighbors(u) {
                if v != u && dist[v] == usize::MAX {
                    dist[v] = dist[u] + 1;
                    far = far.max(dist[v]);
                    queue.push_back(v);
                }
            }
        }
        out[start] = far as f64;
    }
    out
}

/// Fraction of realized links among each node's neighbors relative to a
/// clique; zero for nodes with fewer than two neighbors.
pub fn clustering_coefficient(g: &Graph) -> Vec<f64> {
    let n = g.n();
    let neighbor_sets: Vec<Vec<usize>> = (0..n)
        .map(|i| g.neighbors(i).map(|(j, _)| j).filter(|&j| j != i).collect())
        .collect();
    (0..n)
        .map(|i| {
            let nbrs = &neighbor_sets[i];
            let deg = nbrs.len();
            if deg < 2 {
                return 0.0;
            }
            let mut links = 0usize;
            for (a, &u) in nbrs.iter().enumerate() {
                for &v in &nbrs[a + 1..] {
                    // Neighbor lists are sorted by construction.
                    if neighbor_sets[u].binary_search(&v).is_ok() {
                        links += 1;
                    }
                }
            }
            2.0 * links as f64 / (deg * (deg - 1)) as f64
        })
        .collect()
}
