//! Dense replica of the diffusion and scattering pipeline.
//!
//! Everything here goes through explicit matrix products on a dense walk
//! matrix, independent of the sparse iterative kernels, so the two routes
//! can be checked against each other. Test and report use only.

use nalgebra::{DMatrix, DVector};

use crate::graph::Graph;
use crate::legs::SelectionMatrix;
use crate::scattering::{enumerate_paths, PathRule};

/// Dense lazy walk matrix `alpha I + (1 - alpha) W D^{-1}`.
pub fn dense_walk_matrix(g: &Graph, alpha: f64) -> DMatrix<f64> {
    let n = g.n();
    let degree = g.degree();
    let mut p = DMatrix::zeros(n, n);
    for (i, j, w) in g.pattern() {
        p[(i, j)] += (1.0 - alpha) * w / degree[j];
    }
    for i in 0..n {
        p[(i, i)] += alpha;
    }
    p
}

/// `[P^1 x, ..., P^m x]` by repeated dense products.
pub fn dense_powers(p: &DMatrix<f64>, x: &DVector<f64>, m: usize) -> Vec<DVector<f64>> {
    let mut out = Vec::with_capacity(m);
    let mut current = p * x;
    for _ in 1..m {
        let next = p * &current;
        out.push(current);
        current = next;
    }
    out.push(current);
    out
}

/// Filter responses of the relaxed bank from dense powers:
/// returns (psi responses, phi response).
pub fn dense_responses(
    p: &DMatrix<f64>,
    selection: &SelectionMatrix,
    x: &DVector<f64>,
) -> (Vec<DVector<f64>>, DVector<f64>) {
    let m = selection.m();
    let j = selection.j();
    let powers = dense_powers(p, x, m);
    let weighted = |row: usize| -> DVector<f64> {
        let coeffs = selection.row(row);
        let mut acc = DVector::zeros(x.len());
        for t in 1..=m {
            if coeffs[t - 1] != 0.0 {
                acc += coeffs[t - 1] * &powers[t - 1];
            }
        }
        acc
    };
    let mut psi = Vec::with_capacity(j);
    psi.push(x - weighted(0));
    for r in 1..j {
        psi.push(weighted(r - 1) - weighted(r));
    }
    let phi = weighted(j - 1);
    (psi, phi)
}

/// Full dense scattering feature vector for one single-channel signal, in
/// the same column order as the sparse transform (paths by length then
/// lexicographic, low-pass last, moments innermost).
pub fn dense_features(
    p: &DMatrix<f64>,
    selection: &SelectionMatrix,
    x: &DVector<f64>,
    order: usize,
    rule: PathRule,
    q_max: usize,
    normalize: bool,
) -> Vec<f64> {
    let j = selection.j();
    let paths = enumerate_paths(j, order, rule).expect("valid order");
    let moments = |u: &DVector<f64>| -> Vec<f64> {
        let scale = if normalize { 1.0 / u.len() as f64 } else { 1.0 };
        (1..=q_max)
            .map(|q| u.iter().map(|v| v.abs().powi(q as i32)).sum::<f64>() * scale)
            .collect()
    };
    let mut outputs: Vec<DVector<f64>> = Vec::with_capacity(paths.len());
    for path in &paths {
        if path.is_empty() {
            outputs.push(x.clone());
            continue;
        }
        let mut current = x.clone();
        for (k, &jx) in path.iter().enumerate() {
            if k > 0 {
                current = current.map(f64::abs);
            }
            let (psi, _) = dense_responses(p, selection, &current);
            current = psi[jx].clone();
        }
        outputs.push(current);
    }
    let (_, phi) = dense_responses(p, selection, x);
    let mut values = Vec::new();
    for u in &outputs {
        values.extend(moments(u));
    }
    values.extend(moments(&phi));
    values
}
