//! Sparse weighted graphs and the lazy random-walk diffusion operator.
//!
//! The graph stores its symmetric adjacency in CSR form (both directions of
//! every undirected edge), which serves row and column traversal alike. All
//! diffusion arithmetic is 64-bit and never materializes the walk matrix
//! densely; a dense spectral path exists only as a test oracle.

mod diffusion;
mod oracle;
mod signal;

pub use diffusion::{diffusion_cascade, lazy_step, lazy_step_transpose, DiffusionCascade};
pub use oracle::{spectral_oracle, SpectralOracle, DEFAULT_DENSE_ORACLE_CAP};
pub use signal::SignalMatrix;

use crate::error::{Error, Result};

/// Policy for degree-zero nodes during construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IsolatedPolicy {
    /// Fail construction on any isolated node.
    Reject,
    /// Give each isolated node a unit self-loop.
    SelfLoop,
}

/// Undirected weighted graph with positive degrees.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    n: usize,
    /// Canonical edge list: i < j, or i == j for policy self-loops.
    edges: Vec<(usize, usize, f64)>,
    /// CSR over the symmetric adjacency (each undirected edge stored twice,
    /// self-loops once).
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
    degree: Vec<f64>,
}

/// Builds a graph from an undirected edge list.
///
/// Edges must satisfy `i < j` with strictly positive weights and no
/// duplicates. Under [`IsolatedPolicy::SelfLoop`], degree-zero nodes get a
/// unit self-loop; under [`IsolatedPolicy::Reject`] they are an error.
pub fn build_graph(
    n: usize,
    edges: &[(usize, usize, f64)],
    isolated_policy: IsolatedPolicy,
) -> Result<Graph> {
    let mut canonical: Vec<(usize, usize, f64)> = Vec::with_capacity(edges.len());
    let mut seen = std::collections::HashSet::with_capacity(edges.len());
    for &(i, j, w) in edges {
        if i >= n {
            return Err(Error::IndexOutOfRange { index: i, n });
        }
        if j >= n {
            return Err(Error::IndexOutOfRange { index: j, n });
        }
        if i == j {
            return Err(Error::SelfLoopEdge { i });
        }
        if w <= 0.0 || !w.is_finite() {
            return Err(Error::NonPositiveWeight { i, j, w });
        }
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        if !seen.insert((a, b)) {
            return Err(Error::DuplicateEdge { i: a, j: b });
        }
        canonical.push((a, b, w));
    }
    canonical.sort_by(|x, y| (x.0, x.1).cmp(&(y.0, y.1)));

    let mut degree = vec![0.0; n];
    for &(i, j, w) in &canonical {
        degree[i] += w;
        degree[j] += w;
    }
    for i in 0..n {
        if degree[i] == 0.0 {
            match isolated_policy {
                IsolatedPolicy::Reject => return Err(Error::IsolatedNode { i }),
                IsolatedPolicy::SelfLoop => {
                    canonical.push((i, i, 1.0));
                    degree[i] += 1.0;
                }
            }
        }
    }
    canonical.sort_by(|x, y| (x.0, x.1).cmp(&(y.0, y.1)));

    // CSR fill over the symmetric pattern.
    let mut counts = vec![0usize; n];
    for &(i, j, _) in &canonical {
        counts[i] += 1;
        if i != j {
            counts[j] += 1;
        }
    }
    let mut row_ptr = vec![0usize; n + 1];
    for i in 0..n {
        row_ptr[i + 1] = row_ptr[i] + counts[i];
    }
    let nnz = row_ptr[n];
    let mut col_idx = vec![0usize; nnz];
    let mut values = vec![0.0; nnz];
    let mut cursor = row_ptr.clone();
    for &(i, j, w) in &canonical {
        col_idx[cursor[i]] = j;
        values[cursor[i]] = w;
        cursor[i] += 1;
        if i != j {
            col_idx[cursor[j]] = i;
            values[cursor[j]] = w;
            cursor[j] += 1;
        }
    }

    Ok(Graph {
        n,
        edges: canonical,
        row_ptr,
        col_idx,
        values,
        degree,
    })
}

impl Graph {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Canonical undirected edge list (i <= j; i == j only for policy
    /// self-loops).
    pub fn edges(&self) -> &[(usize, usize, f64)] {
        &self.edges
    }

    pub fn degree(&self) -> &[f64] {
        &self.degree
    }

    /// Neighbors of `i` with edge weights, ascending by index. Covers both
    /// row and column traversal since the adjacency is symmetric.
    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let lo = self.row_ptr[i];
        let hi = self.row_ptr[i + 1];
        self.col_idx[lo..hi]
            .iter()
            .copied()
            .zip(self.values[lo..hi].iter().copied())
    }

    /// Number of stored directed entries (2E plus self-loops).
    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    /// Directed entries of the adjacency pattern, row-major.
    pub fn pattern(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |i| self.neighbors(i).map(move |(j, w)| (i, j, w)))
    }

    fn check_signal(&self, x: &SignalMatrix) -> Result<()> {
        if x.n() != self.n {
            return Err(Error::DimensionMismatch {
                context: "signal rows vs graph nodes",
                expected: self.n,
                got: x.n(),
            });
        }
        Ok(())
    }
}

/// Squared norm in the degree-weighted inner-product space:
/// `sum_i x[i]^2 / d_i`, summed over all channels.
pub fn weighted_norm_sq(g: &Graph, x: &SignalMatrix) -> Result<f64> {
    g.check_signal(x)?;
    let mut total = 0.0;
    for c in 0..x.channels() {
        let col = x.column(c);
        for (xi, di) in col.iter().zip(g.degree()) {
            total += xi * xi / di;
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_node_self_loop_policy() {
        let g = build_graph(1, &[], IsolatedPolicy::SelfLoop).unwrap();
        assert_eq!(g.degree(), &[1.0]);
        assert_eq!(g.edges(), &[(0, 0, 1.0)]);
    }

    #[test]
    fn isolated_node_rejected() {
        let err = build_graph(2, &[], IsolatedPolicy::Reject).unwrap_err();
        assert_eq!(err, Error::IsolatedNode { i: 0 });
    }

    #[test]
    fn k2_degrees() {
        let g = build_graph(2, &[(0, 1, 1.0)], IsolatedPolicy::Reject).unwrap();
        assert_eq!(g.degree(), &[1.0, 1.0]);
    }

    #[test]
    fn weighted_path_degrees_are_row_sums() {
        let g = build_graph(3, &[(0, 1, 2.0), (1, 2, 3.0)], IsolatedPolicy::Reject).unwrap();
        assert_eq!(g.degree(), &[2.0, 5.0, 3.0]);
    }

    #[test]
    fn duplicate_edge_detected_across_orientations() {
        let err = build_graph(
            3,
            &[(0, 1, 1.0), (1, 0, 2.0), (1, 2, 1.0)],
            IsolatedPolicy::Reject,
        )
        .unwrap_err();
        assert_eq!(err, Error::DuplicateEdge { i: 0, j: 1 });
    }

    #[test]
    fn bad_inputs_rejected() {
        assert_eq!(
            build_graph(2, &[(0, 2, 1.0)], IsolatedPolicy::Reject).unwrap_err(),
            Error::IndexOutOfRange { index: 2, n: 2 }
        );
        assert_eq!(
            build_graph(2, &[(0, 1, 0.0)], IsolatedPolicy::Reject).unwrap_err(),
            Error::NonPositiveWeight {
                i: 0,
                j: 1,
                w: 0.0
            }
        );
        assert_eq!(
            build_graph(2, &[(1, 1, 1.0)], IsolatedPolicy::Reject).unwrap_err(),
            Error::SelfLoopEdge { i: 1 }
        );
    }

    #[test]
    fn weighted_norm_examples() {
        let g = build_graph(3, &[(0, 1, 2.0), (1, 2, 3.0)], IsolatedPolicy::Reject).unwrap();
        let zero = SignalMatrix::zeros(3, 1);
        assert_eq!(weighted_norm_sq(&g, &zero).unwrap(), 0.0);

        // d = (2, 5, 3), x = (2, 5, 3) -> 4/2 + 25/5 + 9/3 = 10.
        let x = SignalMatrix::from_column(vec![2.0, 5.0, 3.0]);
        assert!((weighted_norm_sq(&g, &x).unwrap() - 10.0).abs() < 1e-15);

        let k2 = build_graph(2, &[(0, 1, 1.0)], IsolatedPolicy::Reject).unwrap();
        let x = SignalMatrix::from_column(vec![1.0, 0.0]);
        assert_eq!(weighted_norm_sq(&k2, &x).unwrap(), 1.0);
    }

    #[test]
    fn neighbors_are_symmetric() {
        let g = build_graph(3, &[(0, 1, 2.0), (1, 2, 3.0)], IsolatedPolicy::Reject).unwrap();
        let n1: Vec<_> = g.neighbors(1).collect();
        assert_eq!(n1, vec![(0, 2.0), (2, 3.0)]);
        let n0: Vec<_> = g.neighbors(0).collect();
        assert_eq!(n0, vec![(1, 2.0)]);
    }
}
