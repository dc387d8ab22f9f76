//! Lazy random-walk diffusion: P_alpha = alpha*I + (1-alpha)*W*D^{-1}.
//!
//! At alpha = 1/2 this is the classic lazy walk. The operator is applied
//! column by column in O(nnz) per channel; the matrix itself is never formed.

use super::{Graph, SignalMatrix};
use crate::error::Result;

/// Applies `P_alpha` to every column of `x`.
///
/// `P_alpha` is left stochastic, so column sums of the signal are preserved.
pub fn lazy_step(g: &Graph, alpha: f64, x: &SignalMatrix) -> Result<SignalMatrix> {
    g.check_signal(x)?;
    let n = g.n();
    let degree = g.degree();
    let mut out = SignalMatrix::zeros(n, x.channels());
    let mut scaled = vec![0.0; n];
    for c in 0..x.channels() {
        let col = x.column(c);
        // z = D^{-1} x, then y = alpha*x + (1-alpha)*W z.
        for i in 0..n {
            scaled[i] = col[i] / degree[i];
        }
        let out_col = out.column_mut(c);
        for i in 0..n {
            let mut acc = 0.0;
            for (j, w) in g.neighbors(i) {
                acc += w * scaled[j];
            }
            out_col[i] = alpha * col[i] + (1.0 - alpha) * acc;
        }
    }
    Ok(out)
}

/// Applies the transpose `P_alpha^T = alpha*I + (1-alpha)*D^{-1}*W`.
///
/// Used by reverse-mode passes; the same CSR serves both orientations since
/// W is symmetric.
pub fn lazy_step_transpose(g: &Graph, alpha: f64, x: &SignalMatrix) -> Result<SignalMatrix> {
    g.check_signal(x)?;
    let n = g.n();
    let degree = g.degree();
    let mut out = SignalMatrix::zeros(n, x.channels());
    for c in 0..x.channels() {
        let col = x.column(c);
        let out_col = out.column_mut(c);
        for i in 0..n {
            let mut acc = 0.0;
            for (j, w) in g.neighbors(i) {
                acc += w * col[j];
            }
            out_col[i] = alpha * col[i] + (1.0 - alpha) * acc / degree[i];
        }
    }
    Ok(out)
}

/// The ordered diffusion sequence `[P x, P^2 x, ..., P^m x]`, computed once
/// and shared by every filter bank over the same signal.
#[derive(Debug, Clone)]
pub struct DiffusionCascade {
    alpha: f64,
    steps: Vec<SignalMatrix>,
}

impl DiffusionCascade {
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Cascade depth m.
    pub fn depth(&self) -> usize {
        self.steps.len()
    }

    /// `P^t x` for `1 <= t <= m`.
    pub fn step(&self, t: usize) -> &SignalMatrix {
        assert!(t >= 1 && t <= self.steps.len(), "cascade step {t} out of range");
        &self.steps[t - 1]
    }
}

/// Iterates `lazy_step` m times. `steps[t-1]` holds `P_alpha^t x`.
pub fn diffusion_cascade(
    g: &Graph,
    alpha: f64,
    x: &SignalMatrix,
    m: usize,
) -> Result<DiffusionCascade> {
    assert!(m >= 1, "cascade depth must be at least 1");
    let mut steps = Vec::with_capacity(m);
    let mut current = lazy_step(g, alpha, x)?;
    for _ in 1..m {
        let next = lazy_step(g, alpha, &current)?;
        steps.push(current);
        current = next;
    }
    steps.push(current);
    Ok(DiffusionCascade { alpha, steps })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_graph, IsolatedPolicy};

    #[test]
    fn single_node_is_identity() {
        let g = build_graph(1, &[], IsolatedPolicy::SelfLoop).unwrap();
        let x = SignalMatrix::from_column(vec![3.25]);
        let y = lazy_step(&g, 0.5, &x).unwrap();
        assert_eq!(y.column(0), &[3.25]);
        let cascade = diffusion_cascade(&g, 0.5, &x, 5).unwrap();
        for t in 1..=5 {
            assert_eq!(cascade.step(t).column(0), &[3.25]);
        }
    }

    #[test]
    fn k2_half_mixes_evenly() {
        let g = build_graph(2, &[(0, 1, 1.0)], IsolatedPolicy::Reject).unwrap();
        let x = SignalMatrix::from_column(vec![1.0, 0.0]);
        let y = lazy_step(&g, 0.5, &x).unwrap();
        assert_eq!(y.column(0), &[0.5, 0.5]);
    }

    #[test]
    fn degree_vector_is_fixed_point() {
        let g = build_graph(3, &[(0, 1, 2.0), (1, 2, 3.0)], IsolatedPolicy::Reject).unwrap();
        let d = SignalMatrix::from_column(g.degree().to_vec());
        let cascade = diffusion_cascade(&g, 0.3, &d, 8).unwrap();
        for t in 1..=8 {
            assert!(cascade.step(t).max_abs_diff(&d) <= 1e-12 * d.max_abs());
        }
    }

    #[test]
    fn mass_is_conserved() {
        let g = build_graph(
            4,
            &[(0, 1, 1.0), (1, 2, 2.0), (2, 3, 0.5), (0, 3, 1.5)],
            IsolatedPolicy::Reject,
        )
        .unwrap();
        let x = SignalMatrix::from_column(vec![1.0, -2.0, 3.0, 0.25]);
        let before: f64 = x.column(0).iter().sum();
        let y = lazy_step(&g, 0.7, &x).unwrap();
        let after: f64 = y.column(0).iter().sum();
        assert!((before - after).abs() <= 1e-12);
    }

    #[test]
    fn transpose_is_adjoint() {
        let g = build_graph(
            4,
            &[(0, 1, 1.0), (1, 2, 2.0), (2, 3, 0.5)],
            IsolatedPolicy::Reject,
        )
        .unwrap();
        let x = SignalMatrix::from_column(vec![1.0, -1.0, 2.0, 0.5]);
        let y = SignalMatrix::from_column(vec![0.3, 0.7, -0.2, 1.1]);
        let px = lazy_step(&g, 0.5, &x).unwrap();
        let pty = lazy_step_transpose(&g, 0.5, &y).unwrap();
        // <P x, y> == <x, P^T y>
        assert!((px.dot(&y) - x.dot(&pty)).abs() <= 1e-12);
    }
}
