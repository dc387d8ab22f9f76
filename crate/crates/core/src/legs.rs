//! Learnable scale selection: trainable logits `theta`, the row-stochastic
//! selection matrix `F = softmax(theta)` with rows reordered by leading
//! scale, the relaxed filter bank built from weighted cascade steps, and the
//! nonexpansiveness certificate for thresholded selections.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::filter_bank::{FilterResponses, ScaleSequence};
use crate::graph::{weighted_norm_sq, DiffusionCascade, Graph, SignalMatrix};
use crate::rng::substream;

/// Trainable selection logits, one row per wavelet.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SelectionParams {
    /// Row-major `J x m`.
    pub theta: Vec<f64>,
    pub j: usize,
    pub m: usize,
}

/// Initialization schemes for the selection logits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitScheme {
    /// Logit spikes of height 4 at the dyadic scales 1, 2, 4, ...; softmax
    /// concentrates near the classic bank.
    DyadicWarm,
    /// All-zero logits; every row starts uniform over scales.
    Uniform,
    /// I.i.d. standard normal logits from the seed.
    Random { seed: u64 },
}

const DYADIC_WARM_KAPPA: f64 = 4.0;

pub fn init_theta(j: usize, m: usize, scheme: InitScheme) -> Result<SelectionParams> {
    if j == 0 || m == 0 || j > m {
        return Err(Error::InvalidShape { j, m });
    }
    let mut theta = vec![0.0; j * m];
    match scheme {
        InitScheme::Uniform => {}
        InitScheme::DyadicWarm => {
            let top = 1usize << (j - 1);
            if top > m {
                return Err(Error::InvalidShape { j, m });
            }
            for row in 0..j {
                theta[row * m + (1 << row) - 1] = DYADIC_WARM_KAPPA;
            }
        }
        InitScheme::Random { seed } => {
            let mut rng = substream(seed, "theta-init");
            for v in &mut theta {
                *v = StandardNormal.sample(&mut rng);
            }
        }
    }
    Ok(SelectionParams { theta, j, m })
}

impl SelectionParams {
    pub fn row(&self, r: usize) -> &[f64] {
        &self.theta[r * self.m..(r + 1) * self.m]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.theta[r * self.m..(r + 1) * self.m]
    }
}

/// Row-stochastic selection matrix with rows ordered by leading scale.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SelectionMatrix {
    /// Row-major `J x m`, rows in sorted order.
    f: Vec<f64>,
    j: usize,
    m: usize,
    /// `row_order[r]` = original theta row shown at sorted position r.
    row_order: Vec<usize>,
}

fn softmax_into(row: &[f64], out: &mut [f64]) {
    let max = row.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let mut sum = 0.0;
    for (o, &v) in out.iter_mut().zip(row) {
        let e = (v - max).exp();
        *o = e;
        sum += e;
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
}

fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (k, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = k;
        }
    }
    best
}

/// Softmaxes every logit row (max-subtracted) and reorders rows so argmax
/// positions are nondecreasing, ties broken by original row index. The
/// permutation is retained so gradients can be routed back.
pub fn selection_matrix(params: &SelectionParams) -> Result<SelectionMatrix> {
    if let Some(pos) = params.theta.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFiniteParameter { position: pos });
    }
    let (j, m) = (params.j, params.m);
    let mut soft = vec![0.0; j * m];
    for r in 0..j {
        softmax_into(params.row(r), &mut soft[r * m..(r + 1) * m]);
    }
    let mut row_order: Vec<usize> = (0..j).collect();
    row_order.sort_by_key(|&r| (argmax(&soft[r * m..(r + 1) * m]), r));
    let mut f = vec![0.0; j * m];
    for (r, &orig) in row_order.iter().enumerate() {
        f[r * m..(r + 1) * m].copy_from_slice(&soft[orig * m..(orig + 1) * m]);
    }
    Ok(SelectionMatrix { f, j, m, row_order })
}

impl SelectionMatrix {
    /// Wraps an explicit nonnegative matrix whose rows sum to one, rows
    /// taken as already ordered.
    pub fn from_stochastic_rows(f: Vec<f64>, j: usize, m: usize) -> Result<Self> {
        if f.len() != j * m || j == 0 || m == 0 {
            return Err(Error::InvalidShape { j, m });
        }
        for r in 0..j {
            let row = &f[r * m..(r + 1) * m];
            if row.iter().any(|&v| !v.is_finite() || v < 0.0) {
                return Err(Error::NonFiniteParameter { position: r * m });
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidShape { j, m });
            }
        }
        Ok(SelectionMatrix {
            f,
            j,
            m,
            row_order: (0..j).collect(),
        })
    }

    /// Exact one-hot selection equivalent to a fixed scale sequence.
    pub fn one_hot(scales: &ScaleSequence) -> Self {
        let j = scales.wavelet_count();
        let m = scales.m();
        let mut f = vec![0.0; j * m];
        for (r, &t) in scales.scales().iter().enumerate() {
            f[r * m + t - 1] = 1.0;
        }
        SelectionMatrix {
            f,
            j,
            m,
            row_order: (0..j).collect(),
        }
    }

    pub fn j(&self) -> usize {
        self.j
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.f[r * self.m..(r + 1) * self.m]
    }

    pub fn row_order(&self) -> &[usize] {
        &self.row_order
    }

    pub fn entries(&self) -> &[f64] {
        &self.f
    }

    /// Zeroes entries below `threshold` and renormalizes each row to sum 1.
    pub fn sparsified(&self, threshold: f64) -> Self {
        let mut out = self.clone();
        for r in 0..self.j {
            let row = &mut out.f[r * self.m..(r + 1) * self.m];
            for v in row.iter_mut() {
                if *v < threshold {
                    *v = 0.0;
                }
            }
            let sum: f64 = row.iter().sum();
            if sum > 0.0 {
                for v in row.iter_mut() {
                    *v /= sum;
                }
            }
        }
        out
    }

    /// True when row supports are pairwise disjoint and strictly ordered:
    /// every scale used by row r precedes every scale used by row r+1.
    pub fn has_ordered_disjoint_support(&self) -> bool {
        let mut prev_max: Option<usize> = None;
        for r in 0..self.j {
            let row = self.row(r);
            let support: Vec<usize> = (0..self.m).filter(|&t| row[t] != 0.0).collect();
            if support.is_empty() {
                return false;
            }
            if let Some(pm) = prev_max {
                if support[0] <= pm {
                    return false;
                }
            }
            prev_max = Some(*support.last().unwrap());
        }
        true
    }
}

/// Applies the relaxed bank: weighted combinations of cached cascade steps.
///
/// With rows indexed from zero, `psi[0] = x - sum_t F[0,t] P^t x`,
/// `psi[j] = sum_t (F[j-1,t] - F[j,t]) P^t x` for `j >= 1`, and
/// `phi = sum_t F[J-1,t] P^t x`. An exactly one-hot selection reproduces the
/// fixed bank bit-for-bit.
pub fn legs_apply(
    selection: &SelectionMatrix,
    cascade: &DiffusionCascade,
    x: &SignalMatrix,
) -> Result<FilterResponses> {
    if cascade.depth() != selection.m {
        return Err(Error::DimensionMismatch {
            context: "cascade depth vs selection columns",
            expected: selection.m,
            got: cascade.depth(),
        });
    }
    if cascade.step(1).n() != x.n() || cascade.step(1).channels() != x.channels() {
        return Err(Error::DimensionMismatch {
            context: "cascade vs signal shape",
            expected: x.n() * x.channels(),
            got: cascade.step(1).n() * cascade.step(1).channels(),
        });
    }
    let j = selection.j;
    let m = selection.m;
    // weighted[r] = sum_t F[r,t] P^t x
    let mut weighted = Vec::with_capacity(j);
    for r in 0..j {
        let row = selection.row(r);
        let mut acc = SignalMatrix::zeros(x.n(), x.channels());
        for t in 1..=m {
            let c = row[t - 1];
            if c != 0.0 {
                acc.axpy(c, cascade.step(t));
            }
        }
        weighted.push(acc);
    }
    let mut psi = Vec::with_capacity(j);
    psi.push(x.sub(&weighted[0]));
    for r in 1..j {
        psi.push(weighted[r - 1].sub(&weighted[r]));
    }
    let phi = weighted[j - 1].clone();
    Ok(FilterResponses { psi, phi })
}

/// Nonexpansiveness certificate.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct NonexpansiveReport {
    /// Whether the sparsified selection has ordered disjoint row supports.
    pub support_ok: bool,
    /// Worst observed (response energy) / (input energy) in the weighted
    /// norm over the sampled signals.
    pub max_energy_ratio: f64,
}

/// Sparsifies the selection at `threshold`, checks the ordered
/// disjoint-support hypothesis, and measures the worst energy ratio over
/// `trials` random unit signals. Never mutates training state.
pub fn check_nonexpansive(
    selection: &SelectionMatrix,
    threshold: f64,
    g: &Graph,
    trials: usize,
    seed: u64,
) -> Result<NonexpansiveReport> {
    let sparse = selection.sparsified(threshold);
    let support_ok = sparse.has_ordered_disjoint_support();
    let mut rng = substream(seed, "nonexpansive-signals");
    let mut max_ratio: f64 = 0.0;
    for _ in 0..trials {
        let mut x = SignalMatrix::zeros(g.n(), 1);
        for v in x.column_mut(0) {
            *v = StandardNormal.sample(&mut rng);
        }
        let norm_sq = weighted_norm_sq(g, &x)?;
        if norm_sq == 0.0 {
            continue;
        }
        let cascade = crate::graph::diffusion_cascade(g, 0.5, &x, sparse.m)?;
        let responses = legs_apply(&sparse, &cascade, &x)?;
        let mut energy = weighted_norm_sq(g, &responses.phi)?;
        for p in &responses.psi {
            energy += weighted_norm_sq(g, p)?;
        }
        max_ratio = max_ratio.max(energy / norm_sq);
    }
    let _ = rng.random::<u64>();
    Ok(NonexpansiveReport {
        support_ok,
        max_energy_ratio: max_ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filter_bank::{apply_bank, dyadic_scales};
    use crate::graph::{build_graph, diffusion_cascade, IsolatedPolicy};

    #[test]
    fn uniform_init_softmaxes_to_uniform_rows() {
        let params = init_theta(2, 4, InitScheme::Uniform).unwrap();
        let sel = selection_matrix(&params).unwrap();
        for r in 0..2 {
            for &v in sel.row(r) {
                assert!((v - 0.25).abs() <= 1e-15);
            }
        }
    }

    #[test]
    fn dyadic_warm_rows_peak_at_dyadic_scales() {
        let params = init_theta(3, 8, InitScheme::DyadicWarm).unwrap();
        let sel = selection_matrix(&params).unwrap();
        for (r, expect) in [(0usize, 0usize), (1, 1), (2, 3)] {
            assert_eq!(argmax(sel.row(r)), expect);
        }
        assert_eq!(sel.row_order(), &[0, 1, 2]);
    }

    #[test]
    fn random_init_is_seed_deterministic() {
        let a = init_theta(3, 6, InitScheme::Random { seed: 7 }).unwrap();
        let b = init_theta(3, 6, InitScheme::Random { seed: 7 }).unwrap();
        assert_eq!(a, b);
        let c = init_theta(3, 6, InitScheme::Random { seed: 8 }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn rows_reorder_by_leading_scale() {
        let mut params = init_theta(2, 4, InitScheme::Uniform).unwrap();
        params.row_mut(0)[2] = 9.0; // argmax at scale index 2
        params.row_mut(1)[0] = 9.0; // argmax at scale index 0
        let sel = selection_matrix(&params).unwrap();
        assert_eq!(sel.row_order(), &[1, 0]);
        assert_eq!(argmax(sel.row(0)), 0);
        assert_eq!(argmax(sel.row(1)), 2);
    }

    #[test]
    fn softmax_matches_direct_evaluation() {
        let mut params = init_theta(1, 4, InitScheme::Uniform).unwrap();
        params.row_mut(0).copy_from_slice(&[10.0, 0.0, 0.0, 0.0]);
        let sel = selection_matrix(&params).unwrap();
        let z = 10.0f64.exp() + 3.0;
        let expect = [10.0f64.exp() / z, 1.0 / z, 1.0 / z, 1.0 / z];
        for (a, b) in sel.row(0).iter().zip(expect) {
            assert!((a - b).abs() <= 1e-12);
        }
        let sum: f64 = sel.row(0).iter().sum();
        assert!((sum - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn non_finite_theta_is_an_error() {
        let mut params = init_theta(1, 3, InitScheme::Uniform).unwrap();
        params.row_mut(0)[1] = f64::NAN;
        assert_eq!(
            selection_matrix(&params).unwrap_err(),
            Error::NonFiniteParameter { position: 1 }
        );
    }

    #[test]
    fn one_hot_reduces_to_fixed_bank_exactly() {
        let g = build_graph(
            5,
            &[(0, 1, 1.0), (1, 2, 2.0), (2, 3, 1.0), (3, 4, 1.0), (0, 4, 0.5)],
            IsolatedPolicy::Reject,
        )
        .unwrap();
        let x = SignalMatrix::from_column(vec![1.0, -1.0, 2.0, 0.0, 0.5]);
        let scales = dyadic_scales(2, 4).unwrap();
        let cascade = diffusion_cascade(&g, 0.5, &x, 4).unwrap();
        let fixed = apply_bank(&cascade, &scales, &x).unwrap();
        let sel = SelectionMatrix::one_hot(&scales);
        let relaxed = legs_apply(&sel, &cascade, &x).unwrap();
        for (a, b) in fixed.psi.iter().zip(&relaxed.psi) {
            assert_eq!(a.data(), b.data());
        }
        assert_eq!(fixed.phi.data(), relaxed.phi.data());
    }

    #[test]
    fn degree_signal_collapses_under_stochastic_rows() {
        let g = build_graph(3, &[(0, 1, 2.0), (1, 2, 3.0)], IsolatedPolicy::Reject).unwrap();
        let d = SignalMatrix::from_column(g.degree().to_vec());
        let params = init_theta(3, 6, InitScheme::Random { seed: 3 }).unwrap();
        let sel = selection_matrix(&params).unwrap();
        let cascade = diffusion_cascade(&g, 0.5, &d, 6).unwrap();
        let r = legs_apply(&sel, &cascade, &d).unwrap();
        for p in &r.psi {
            assert!(p.max_abs() <= 1e-12 * d.max_abs());
        }
        assert!(r.phi.max_abs_diff(&d) <= 1e-12 * d.max_abs());
    }

    #[test]
    fn telescoping_holds_for_softmax_rows() {
        let g = build_graph(
            4,
            &[(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0), (0, 3, 1.0)],
            IsolatedPolicy::Reject,
        )
        .unwrap();
        let x = SignalMatrix::from_column(vec![2.0, -1.0, 0.5, 1.0]);
        let params = init_theta(3, 5, InitScheme::Random { seed: 11 }).unwrap();
        let sel = selection_matrix(&params).unwrap();
        let cascade = diffusion_cascade(&g, 0.5, &x, 5).unwrap();
        let r = legs_apply(&sel, &cascade, &x).unwrap();
        assert!(r.telescoping_sum().max_abs_diff(&x) <= 1e-10 * x.max_abs());
    }

    #[test]
    fn sparsify_and_support_checks() {
        let scales = dyadic_scales(2, 4).unwrap();
        let one_hot = SelectionMatrix::one_hot(&scales);
        assert!(one_hot.has_ordered_disjoint_support());

        // Two rows sharing a column above threshold.
        let mut shared = one_hot.clone();
        shared.f[0 * 4 + 1] = 0.4; // row 0 also uses scale 2
        assert!(!shared.sparsified(1e-3).has_ordered_disjoint_support());
    }

    #[test]
    fn nonexpansive_report_for_one_hot() {
        let g = build_graph(
            6,
            &[(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0), (3, 4, 1.0), (4, 5, 1.0), (0, 5, 1.0)],
            IsolatedPolicy::Reject,
        )
        .unwrap();
        let scales = dyadic_scales(2, 4).unwrap();
        let sel = SelectionMatrix::one_hot(&scales);
        let report = check_nonexpansive(&sel, 1e-3, &g, 200, 42).unwrap();
        assert!(report.support_ok);
        assert!(report.max_energy_ratio <= 1.0 + 1e-10);
    }
}
