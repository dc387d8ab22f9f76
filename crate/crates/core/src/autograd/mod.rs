//! Explicit reverse-mode gradients through the scattering transform.
//!
//! The forward trace retains every bank application (stage input, diffusion
//! cascade, responses). The backward pass walks paths longest-first,
//! pushing feature adjoints through the moments, the absolute values
//! (sign subgradient, zero at zero), and each filter application, and
//! accumulates the selection-matrix gradient which is then routed through
//! the row reordering and the full softmax Jacobian.

mod fd;

pub use fd::fd_check;

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::graph::{lazy_step_transpose, DiffusionCascade, Graph, SignalMatrix};
use crate::legs::SelectionMatrix;
use crate::scattering::{ForwardTrace, ScatteringPath};

/// Gradients produced by one backward pass.
#[derive(Debug, Clone)]
pub struct GradientBundle {
    /// Row-major `J x m`, in the original (unsorted) logit row space.
    pub d_theta: Vec<f64>,
    /// Flat head-parameter gradient in the head's layout.
    pub d_head: Vec<f64>,
    /// Diagnostic adjacency gradient on the directed pattern of W.
    pub d_adjacency: Option<Vec<(usize, usize, f64)>>,
}

/// Jacobian of one softmax row: `J[t][s] = sigma_t (delta_ts - sigma_s)`.
/// Rows sum to zero.
pub fn softmax_row_jacobian(theta_row: &[f64]) -> Result<Vec<Vec<f64>>> {
    if let Some(pos) = theta_row.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFiniteParameter { position: pos });
    }
    let max = theta_row.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let exps: Vec<f64> = theta_row.iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    let sigma: Vec<f64> = exps.iter().map(|e| e / sum).collect();
    Ok((0..sigma.len())
        .map(|t| {
            (0..sigma.len())
                .map(|s| sigma[t] * (if t == s { 1.0 } else { 0.0 } - sigma[s]))
                .collect()
        })
        .collect())
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Adjoints for one bank application, aligned with its responses.
pub struct FilterAdjoints<'a> {
    pub psi: Vec<Option<&'a SignalMatrix>>,
    pub phi: Option<&'a SignalMatrix>,
}

/// Accumulates the selection-matrix gradient of one bank application into
/// `d_f` (row-major `J x m`, sorted row space).
///
/// Per filter: the band-pass `psi[0]` pulls `-<A, P^t x>` into row 0;
/// `psi[j]` pulls `+<A, P^t x>` into row j-1 and `-<A, P^t x>` into row j;
/// the low-pass pulls `+<A, P^t x>` into the last row.
pub fn grad_wrt_f(
    adjoints: &FilterAdjoints<'_>,
    cascade: &DiffusionCascade,
    d_f: &mut [f64],
    j: usize,
) -> Result<()> {
    let m = cascade.depth();
    if d_f.len() != j * m {
        return Err(Error::ShapeMismatch {
            context: "selection gradient buffer",
            expected: j * m,
            got: d_f.len(),
        });
    }
    if adjoints.psi.len() != j {
        return Err(Error::ShapeMismatch {
            context: "filter adjoint count",
            expected: j,
            got: adjoints.psi.len(),
        });
    }
    let mut add_row = |row: usize, coeff: f64, a: &SignalMatrix| {
        for t in 1..=m {
            d_f[row * m + t - 1] += coeff * a.dot(cascade.step(t));
        }
    };
    for (jx, adj) in adjoints.psi.iter().enumerate() {
        let Some(a) = adj else { continue };
        if jx == 0 {
            add_row(0, -1.0, a);
        } else {
            add_row(jx - 1, 1.0, a);
            add_row(jx, -1.0, a);
        }
    }
    if let Some(a) = adjoints.phi {
        add_row(j - 1, 1.0, a);
    }
    Ok(())
}

/// Transpose cascade `[(P^T)^1 a, ..., (P^T)^m a]`.
fn transpose_cascade(
    g: &Graph,
    alpha: f64,
    a: &SignalMatrix,
    m: usize,
) -> Result<Vec<SignalMatrix>> {
    let mut steps = Vec::with_capacity(m);
    let mut current = lazy_step_transpose(g, alpha, a)?;
    for _ in 1..m {
        let next = lazy_step_transpose(g, alpha, &current)?;
        steps.push(current);
        current = next;
    }
    steps.push(current);
    Ok(steps)
}

/// Applies the transpose of filter `jx` to adjoint `a` using the selection
/// coefficients: same weighted combination as the forward filter, with
/// `(P^T)^t` in place of `P^t`.
fn filter_transpose_apply(
    g: &Graph,
    alpha: f64,
    selection: &SelectionMatrix,
    jx: usize,
    a: &SignalMatrix,
) -> Result<SignalMatrix> {
    let m = selection.m();
    let steps = transpose_cascade(g, alpha, a, m)?;
    let weighted_row = |row: usize| -> SignalMatrix {
        let coeffs = selection.row(row);
        let mut acc = SignalMatrix::zeros(a.n(), a.channels());
        for t in 1..=m {
            let c = coeffs[t - 1];
            if c != 0.0 {
                acc.axpy(c, &steps[t - 1]);
            }
        }
        acc
    };
    Ok(if jx == 0 {
        a.sub(&weighted_row(0))
    } else {
        weighted_row(jx - 1).sub(&weighted_row(jx))
    })
}

/// Splits a flat feature adjoint back into per-path and low-pass moment
/// adjoints, mirroring the transform's channel-major assembly.
fn unassemble(
    trace: &ForwardTrace,
    d_features: &[f64],
    channels: usize,
) -> Result<(Vec<Vec<Vec<f64>>>, Vec<Vec<f64>>)> {
    let paths = trace.path_locations.len();
    let q_max = trace.q_max;
    let expected = (paths + 1) * q_max * channels;
    if d_features.len() != expected {
        return Err(Error::ShapeMismatch {
            context: "feature adjoint length",
            expected,
            got: d_features.len(),
        });
    }
    let mut d_path = vec![vec![vec![0.0; q_max]; channels]; paths];
    let mut d_phi = vec![vec![0.0; q_max]; channels];
    let mut k = 0;
    for c in 0..channels {
        for p in 0..paths {
            for q in 0..q_max {
                d_path[p][c][q] = d_features[k];
                k += 1;
            }
        }
        for q in 0..q_max {
            d_phi[c][q] = d_features[k];
            k += 1;
        }
    }
    Ok((d_path, d_phi))
}

/// Moment backward: node adjoint of `sum_q dS_q * S_q(u)` with
/// `dS_q/du_i = scale * q * |u_i|^(q-1) * sign(u_i)` and `sign(0) = 0`.
fn moment_backward(u: &SignalMatrix, d_moments: &[Vec<f64>], normalize: bool) -> SignalMatrix {
    let scale = if normalize && u.n() > 0 {
        1.0 / u.n() as f64
    } else {
        1.0
    };
    let mut out = SignalMatrix::zeros(u.n(), u.channels());
    for c in 0..u.channels() {
        let col = u.column(c);
        let d_col = &d_moments[c];
        let out_col = out.column_mut(c);
        for (i, &v) in col.iter().enumerate() {
            let mut acc = 0.0;
            for (qi, &ds) in d_col.iter().enumerate() {
                let q = (qi + 1) as f64;
                acc += ds * scale * q * v.abs().powi(qi as i32) * sign(v);
            }
            out_col[i] = acc;
        }
    }
    out
}

/// Walks the trace longest-path-first, calling `sink(stage, filter, adjoint)`
/// for every filter application with a nonzero adjoint. `filter = None`
/// flags the low-pass output of the root stage.
fn backward_walk<S>(
    g: &Graph,
    alpha: f64,
    trace: &ForwardTrace,
    d_features: &[f64],
    mut sink: S,
) -> Result<()>
where
    S: FnMut(usize, Option<usize>, &SignalMatrix) -> Result<()>,
{
    let channels = trace.stages[0].input.channels();
    let (d_path, d_phi) = unassemble(trace, d_features, channels)?;

    // Initialize node-level adjoints from the moment backward.
    let mut adjoints: HashMap<ScatteringPath, SignalMatrix> = HashMap::new();
    for (idx, (path, loc)) in trace.path_locations.iter().enumerate() {
        let u = trace.path_output(*loc);
        adjoints.insert(path.clone(), moment_backward(u, &d_path[idx], trace.normalize));
    }
    let phi_adj = moment_backward(&trace.stages[0].responses.phi, &d_phi, trace.normalize);
    sink(0, None, &phi_adj)?;

    // Longest paths first so prefix adjoints are complete before their turn.
    let mut order: Vec<usize> = (0..trace.path_locations.len()).collect();
    order.sort_by_key(|&i| std::cmp::Reverse(trace.path_locations[i].0.len()));
    for i in order {
        let (path, loc) = &trace.path_locations[i];
        let Some((stage, filter)) = loc else { continue };
        let a = adjoints.get(path).expect("adjoint initialized").clone();
        sink(*stage, Some(*filter), &a)?;
        if path.len() >= 2 {
            // Through the absolute value into the previous filter output.
            let b = filter_transpose_apply(g, alpha, &trace.selection, *filter, &a)?;
            let prefix = &path[..path.len() - 1];
            let prefix_loc = trace
                .path_locations
                .iter()
                .find(|(p, _)| p == prefix)
                .expect("prefix enumerated")
                .1;
            let u_prefix = trace.path_output(prefix_loc);
            let parent = adjoints.get_mut(prefix).expect("prefix adjoint");
            for c in 0..channels {
                let bc = b.column(c);
                let uc = u_prefix.column(c);
                let pc = parent.column_mut(c);
                for k in 0..bc.len() {
                    pc[k] += bc[k] * sign(uc[k]);
                }
            }
        }
    }
    Ok(())
}

/// Full selection gradient of a scalar loss with adjoint `d_features`,
/// in the sorted row space of the trace's selection matrix.
pub fn backward_selection(
    g: &Graph,
    alpha: f64,
    trace: &ForwardTrace,
    d_features: &[f64],
) -> Result<Vec<f64>> {
    let j = trace.selection.j();
    let m = trace.selection.m();
    let mut d_f_sorted = vec![0.0; j * m];
    backward_walk(g, alpha, trace, d_features, |stage, filter, adjoint| {
        let cascade = &trace.stages[stage].cascade;
        let mut psi: Vec<Option<&SignalMatrix>> = vec![None; j];
        let mut phi = None;
        match filter {
            Some(jx) => psi[jx] = Some(adjoint),
            None => phi = Some(adjoint),
        }
        grad_wrt_f(&FilterAdjoints { psi, phi }, cascade, &mut d_f_sorted, j)
    })?;
    Ok(d_f_sorted)
}

/// Gradient of the loss with respect to the selection logits: the sorted
/// selection gradient routed back through the row reordering, then through
/// the full softmax Jacobian of each row.
pub fn backward_theta(
    g: &Graph,
    alpha: f64,
    trace: &ForwardTrace,
    d_features: &[f64],
) -> Result<Vec<f64>> {
    let selection = &trace.selection;
    let j = selection.j();
    let m = selection.m();
    let d_f_sorted = backward_selection(g, alpha, trace, d_features)?;

    let mut d_theta = vec![0.0; j * m];
    for (sorted_row, &orig_row) in selection.row_order().iter().enumerate() {
        let sigma = selection.row(sorted_row);
        let d_f = &d_f_sorted[sorted_row * m..(sorted_row + 1) * m];
        // d_theta_s = sigma_s (d_f_s - <d_f, sigma>)
        let inner: f64 = d_f.iter().zip(sigma).map(|(a, b)| a * b).sum();
        for s in 0..m {
            d_theta[orig_row * m + s] = sigma[s] * (d_f[s] - inner);
        }
    }
    Ok(d_theta)
}

/// Diagnostic adjacency gradient using the stated power-rule expansion
/// `dP^t/dW_ab = sum_k P^(k-1) (J^ab D^-1) P^(t-k)`.
///
/// The degree normalization is treated as constant, the laziness prefactor
/// is omitted, and only the single directed entry (a, b) is perturbed; this
/// is NOT the exact derivative of the lazy walk operator in W. Values are
/// returned on the directed pattern of W in row-major order.
pub fn grad_adjacency_paper(
    g: &Graph,
    alpha: f64,
    trace: &ForwardTrace,
    d_features: &[f64],
    cap: usize,
) -> Result<Vec<(usize, usize, f64)>> {
    if g.n() > cap {
        return Err(Error::GraphTooLargeForDenseOracle { n: g.n(), cap });
    }
    let selection = &trace.selection;
    let j = selection.j();
    let m = selection.m();
    let degree = g.degree();
    let pattern: Vec<(usize, usize)> = g.pattern().map(|(a, b, _)| (a, b)).collect();
    let mut values = vec![0.0; pattern.len()];

    backward_walk(g, alpha, trace, d_features, |stage, filter, adjoint| {
        // Per-scale coefficient of this filter in the relaxed bank.
        let coeff = |t: usize| -> f64 {
            match filter {
                Some(0) => -selection.row(0)[t - 1],
                Some(jx) => selection.row(jx - 1)[t - 1] - selection.row(jx)[t - 1],
                None => selection.row(j - 1)[t - 1],
            }
        };
        let stage_ref = &trace.stages[stage];
        // Forward powers S_r = P^r y (r = 0 is the stage input itself).
        let forward_pow = |r: usize| -> &SignalMatrix {
            if r == 0 {
                &stage_ref.input
            } else {
                stage_ref.cascade.step(r)
            }
        };
        let back_steps = transpose_cascade(g, alpha, adjoint, m.saturating_sub(1).max(1))?;
        let backward_pow = |r: usize| -> &SignalMatrix {
            if r == 0 {
                adjoint
            } else {
                &back_steps[r - 1]
            }
        };
        let channels = adjoint.channels();
        for t in 1..=m {
            let c_t = coeff(t);
            if c_t == 0.0 {
                continue;
            }
            for k in 1..=t {
                let b_pow = backward_pow(k - 1);
                let s_pow = forward_pow(t - k);
                for (idx, &(a, b)) in pattern.iter().enumerate() {
                    let mut dot = 0.0;
                    for c in 0..channels {
                        dot += b_pow.column(c)[a] * s_pow.column(c)[b];
                    }
                    values[idx] += c_t * dot / degree[b];
                }
            }
        }
        Ok(())
    })?;

    Ok(pattern
        .iter()
        .zip(values)
        .map(|(&(a, b), v)| (a, b, v))
        .collect())
}
