//! Dense spectral oracle, test-only path.
//!
//! `P_alpha` has the symmetric conjugate `M = D^{-1/2} P_alpha D^{1/2}`,
//! whose eigendecomposition underwrites the frame-bound checks. The dense
//! route is capped; production code paths never call it.

use nalgebra::{DMatrix, DVector};

use super::Graph;
use crate::error::{Error, Result};

pub const DEFAULT_DENSE_ORACLE_CAP: usize = 256;

/// Symmetric conjugate of the diffusion operator with its eigensystem,
/// eigenvalues sorted descending.
#[derive(Debug, Clone)]
pub struct SpectralOracle {
    pub matrix: DMatrix<f64>,
    pub eigenvalues: DVector<f64>,
    pub eigenvectors: DMatrix<f64>,
}

/// Builds `M = alpha*I + (1-alpha) * D^{-1/2} W D^{-1/2}` densely and
/// diagonalizes it. Errors out above `cap` nodes.
pub fn spectral_oracle(g: &Graph, alpha: f64, cap: usize) -> Result<SpectralOracle> {
    let n = g.n();
    if n > cap {
        return Err(Error::GraphTooLargeForDenseOracle { n, cap });
    }
    let degree = g.degree();
    let mut m = DMatrix::zeros(n, n);
    for (i, j, w) in g.pattern() {
        m[(i, j)] += (1.0 - alpha) * w / (degree[i] * degree[j]).sqrt();
    }
    for i in 0..n {
        m[(i, i)] += alpha;
    }

    let eig = m.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        let (va, vb): (f64, f64) = (eig.eigenvalues[a], eig.eigenvalues[b]);
        vb.partial_cmp(&va).expect("finite eigenvalues")
    });
    let eigenvalues = DVector::from_iterator(n, order.iter().map(|&k| eig.eigenvalues[k]));
    let mut eigenvectors = DMatrix::zeros(n, n);
    for (col, &k) in order.iter().enumerate() {
        eigenvectors.set_column(col, &eig.eigenvectors.column(k));
    }

    Ok(SpectralOracle {
        matrix: m,
        eigenvalues,
        eigenvectors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_graph, IsolatedPolicy};

    #[test]
    fn single_node_spectrum() {
        let g = build_graph(1, &[], IsolatedPolicy::SelfLoop).unwrap();
        let oracle = spectral_oracle(&g, 0.5, DEFAULT_DENSE_ORACLE_CAP).unwrap();
        assert!((oracle.matrix[(0, 0)] - 1.0).abs() < 1e-15);
        assert!((oracle.eigenvalues[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn k2_spectrum_is_one_and_zero() {
        let g = build_graph(2, &[(0, 1, 1.0)], IsolatedPolicy::Reject).unwrap();
        let oracle = spectral_oracle(&g, 0.5, DEFAULT_DENSE_ORACLE_CAP).unwrap();
        assert!((oracle.eigenvalues[0] - 1.0).abs() < 1e-12);
        assert!(oracle.eigenvalues[1].abs() < 1e-12);
    }

    #[test]
    fn cap_is_enforced() {
        let g = build_graph(3, &[(0, 1, 1.0), (1, 2, 1.0)], IsolatedPolicy::Reject).unwrap();
        let err = spectral_oracle(&g, 0.5, 2).unwrap_err();
        assert_eq!(err, Error::GraphTooLargeForDenseOracle { n: 3, cap: 2 });
    }

    #[test]
    fn reconstruction_and_symmetry() {
        let g = build_graph(
            5,
            &[
                (0, 1, 1.0),
                (1, 2, 2.0),
                (2, 3, 1.0),
                (3, 4, 0.5),
                (0, 4, 1.5),
                (1, 3, 1.0),
            ],
            IsolatedPolicy::Reject,
        )
        .unwrap();
        let oracle = spectral_oracle(&g, 0.5, DEFAULT_DENSE_ORACLE_CAP).unwrap();
        let m = &oracle.matrix;
        for i in 0..5 {
            for j in 0..5 {
                assert!((m[(i, j)] - m[(j, i)]).abs() <= 1e-12);
            }
        }
        let lambda = DMatrix::from_diagonal(&oracle.eigenvalues);
        let rebuilt = &oracle.eigenvectors * lambda * oracle.eigenvectors.transpose();
        let err = (m - rebuilt).abs().max();
        assert!(err <= 1e-10, "reconstruction error {err}");
    }
}
