//! Fixed diffusion-wavelet filter banks over arbitrary increasing scales.
//!
//! A bank over scales `t_1 < ... < t_J` consists of the band-pass filters
//! `Psi_0 = I - P^{t_1}`, `Psi_j = P^{t_j} - P^{t_{j+1}}` and the low-pass
//! `Phi = P^{t_J}`. The dyadic bank is the instance with scales
//! `[1, 2, 4, ..., 2^J]`; there is no separate dyadic code path.

use crate::error::{Error, Result};
use crate::graph::{weighted_norm_sq, DiffusionCascade, Graph, SignalMatrix};

/// Strictly increasing positive integer diffusion scales, bounded by the
/// cascade depth m.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct ScaleSequence {
    scales: Vec<usize>,
    m: usize,
}

impl ScaleSequence {
    pub fn new(scales: Vec<usize>, m: usize) -> Result<Self> {
        assert!(!scales.is_empty(), "scale sequence must be nonempty");
        let mut prev = 0usize;
        for &t in &scales {
            if t <= prev {
                return Err(Error::InvalidScales {
                    t1: scales[0],
                    tj: t,
                });
            }
            prev = t;
        }
        if prev > m {
            return Err(Error::ScaleExceedsCascade { scale: prev, m });
        }
        Ok(Self { scales, m })
    }

    pub fn scales(&self) -> &[usize] {
        &self.scales
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Number of band-pass filters (one per scale).
    pub fn wavelet_count(&self) -> usize {
        self.scales.len()
    }
}

/// Scales `[2^0, 2^1, ..., 2^j_max]`, requiring `2^j_max <= m`.
pub fn dyadic_scales(j_max: usize, m: usize) -> Result<ScaleSequence> {
    let top = 1usize
        .checked_shl(j_max as u32)
        .ok_or(Error::ScaleExceedsCascade { scale: usize::MAX, m })?;
    if top > m {
        return Err(Error::ScaleExceedsCascade { scale: top, m });
    }
    ScaleSequence::new((0..=j_max).map(|j| 1 << j).collect(), m)
}

/// Band-pass responses `psi[j]` plus the low-pass response `phi` of one bank
/// application.
#[derive(Debug, Clone)]
pub struct FilterResponses {
    pub psi: Vec<SignalMatrix>,
    pub phi: SignalMatrix,
}

impl FilterResponses {
    /// Reconstructs the input via the telescoping sum `sum_j psi[j] + phi`.
    pub fn telescoping_sum(&self) -> SignalMatrix {
        let mut acc = self.phi.clone();
        for p in &self.psi {
            acc.axpy(1.0, p);
        }
        acc
    }
}

/// Applies the generalized bank to `x` using the precomputed cascade.
///
/// `psi[0] = x - steps[t_1]`, `psi[j] = steps[t_j] - steps[t_{j+1}]`,
/// `phi = steps[t_J]`. Only cascade lookups and vector arithmetic; no dense
/// matrices are formed.
pub fn apply_bank(
    cascade: &DiffusionCascade,
    scales: &ScaleSequence,
    x: &SignalMatrix,
) -> Result<FilterResponses> {
    let t = scales.scales();
    let t_max = *t.last().expect("nonempty scales");
    if t_max > cascade.depth() {
        return Err(Error::ScaleExceedsCascade {
            scale: t_max,
            m: cascade.depth(),
        });
    }
    if cascade.step(1).n() != x.n() || cascade.step(1).channels() != x.channels() {
        return Err(Error::DimensionMismatch {
            context: "cascade vs signal shape",
            expected: x.n() * x.channels(),
            got: cascade.step(1).n() * cascade.step(1).channels(),
        });
    }
    let mut psi = Vec::with_capacity(t.len());
    psi.push(x.sub(cascade.step(t[0])));
    for j in 1..t.len() {
        psi.push(cascade.step(t[j - 1]).sub(cascade.step(t[j])));
    }
    let phi = cascade.step(t_max).clone();
    Ok(FilterResponses { psi, phi })
}

/// Lower frame constant `C(t1, tJ) = min over xi in [0,1] of
/// xi^(2 tJ) + (1 - xi^t1)^2`.
///
/// Grid scan (1e4 points) localizes the minimum, then ternary search on the
/// bracketing interval refines it to 1e-9 absolute.
pub fn frame_lower_constant(t1: usize, tj: usize) -> Result<f64> {
    if t1 < 1 || t1 > tj {
        return Err(Error::InvalidScales { t1, tj });
    }
    let f = |xi: f64| -> f64 {
        let lo = xi.powi(2 * tj as i32);
        let hp = 1.0 - xi.powi(t1 as i32);
        lo + hp * hp
    };
    const GRID: usize = 10_000;
    let mut best_k = 0usize;
    let mut best = f64::INFINITY;
    for k in 0..=GRID {
        let v = f(k as f64 / GRID as f64);
        if v < best {
            best = v;
            best_k = k;
        }
    }
    let mut lo = (best_k.saturating_sub(1)) as f64 / GRID as f64;
    let mut hi = ((best_k + 1).min(GRID)) as f64 / GRID as f64;
    while hi - lo > 1e-12 {
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        if f(m1) <= f(m2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    Ok(f(0.5 * (lo + hi)))
}

/// Total weighted response energy paired with the weighted norm of the
/// input, for frame-bound checks on a single-column signal.
///
/// The input norm is recovered through the telescoping identity, so callers
/// only need the responses.
pub fn frame_energy(g: &Graph, responses: &FilterResponses) -> Result<(f64, f64)> {
    let mut energy = weighted_norm_sq(g, &responses.phi)?;
    for p in &responses.psi {
        energy += weighted_norm_sq(g, p)?;
    }
    let input = responses.telescoping_sum();
    let input_norm_sq = weighted_norm_sq(g, &input)?;
    Ok((energy, input_norm_sq))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_graph, diffusion_cascade, IsolatedPolicy};

    #[test]
    fn dyadic_scales_examples() {
        assert_eq!(dyadic_scales(4, 16).unwrap().scales(), &[1, 2, 4, 8, 16]);
        assert_eq!(dyadic_scales(0, 1).unwrap().scales(), &[1]);
        assert_eq!(
            dyadic_scales(5, 16).unwrap_err(),
            Error::ScaleExceedsCascade { scale: 32, m: 16 }
        );
    }

    #[test]
    fn scale_sequence_validation() {
        assert!(ScaleSequence::new(vec![1, 3, 7], 8).is_ok());
        assert!(ScaleSequence::new(vec![1, 3, 3], 8).is_err());
        assert!(ScaleSequence::new(vec![2, 9], 8).is_err());
    }

    #[test]
    fn degree_signal_collapses_to_phi() {
        let g = build_graph(3, &[(0, 1, 2.0), (1, 2, 3.0)], IsolatedPolicy::Reject).unwrap();
        let d = SignalMatrix::from_column(g.degree().to_vec());
        let cascade = diffusion_cascade(&g, 0.5, &d, 8).unwrap();
        let scales = dyadic_scales(3, 8).unwrap();
        let r = apply_bank(&cascade, &scales, &d).unwrap();
        for p in &r.psi {
            assert!(p.max_abs() <= 1e-12 * d.max_abs());
        }
        assert!(r.phi.max_abs_diff(&d) <= 1e-12 * d.max_abs());
    }

    #[test]
    fn k2_single_scale_responses() {
        let g = build_graph(2, &[(0, 1, 1.0)], IsolatedPolicy::Reject).unwrap();
        let x = SignalMatrix::from_column(vec![1.0, 0.0]);
        let cascade = diffusion_cascade(&g, 0.5, &x, 2).unwrap();
        let scales = ScaleSequence::new(vec![1], 2).unwrap();
        let r = apply_bank(&cascade, &scales, &x).unwrap();
        assert!(r.psi[0].max_abs_diff(&SignalMatrix::from_column(vec![0.5, -0.5])) <= 1e-15);
        assert!(r.phi.max_abs_diff(&SignalMatrix::from_column(vec![0.5, 0.5])) <= 1e-15);
    }

    #[test]
    fn telescoping_reconstructs_input() {
        let g = build_graph(
            4,
            &[(0, 1, 1.0), (1, 2, 2.0), (2, 3, 0.5), (0, 2, 1.0)],
            IsolatedPolicy::Reject,
        )
        .unwrap();
        let x = SignalMatrix::from_column(vec![1.0, -2.0, 0.5, 3.0]);
        let cascade = diffusion_cascade(&g, 0.5, &x, 10).unwrap();
        let scales = ScaleSequence::new(vec![2, 5, 10], 10).unwrap();
        let r = apply_bank(&cascade, &scales, &x).unwrap();
        assert!(r.telescoping_sum().max_abs_diff(&x) <= 1e-10 * x.max_abs());
    }

    #[test]
    fn frame_constant_equal_scales_is_half() {
        for t in [1usize, 2, 4, 8] {
            let c = frame_lower_constant(t, t).unwrap();
            assert!((c - 0.5).abs() <= 1e-9, "C({t},{t}) = {c}");
        }
    }

    #[test]
    fn frame_constant_rejects_bad_scales() {
        assert_eq!(
            frame_lower_constant(3, 2).unwrap_err(),
            Error::InvalidScales { t1: 3, tj: 2 }
        );
        assert_eq!(
            frame_lower_constant(0, 2).unwrap_err(),
            Error::InvalidScales { t1: 0, tj: 2 }
        );
    }

    #[test]
    fn frame_energy_zero_and_degree_cases() {
        let g = build_graph(3, &[(0, 1, 2.0), (1, 2, 3.0)], IsolatedPolicy::Reject).unwrap();
        let zero = SignalMatrix::zeros(3, 1);
        let cascade = diffusion_cascade(&g, 0.5, &zero, 4).unwrap();
        let scales = dyadic_scales(2, 4).unwrap();
        let r = apply_bank(&cascade, &scales, &zero).unwrap();
        let (e, n) = frame_energy(&g, &r).unwrap();
        assert_eq!((e, n), (0.0, 0.0));

        let d = SignalMatrix::from_column(g.degree().to_vec());
        let cascade = diffusion_cascade(&g, 0.5, &d, 4).unwrap();
        let r = apply_bank(&cascade, &scales, &d).unwrap();
        let (e, n) = frame_energy(&g, &r).unwrap();
        let dn = weighted_norm_sq(&g, &d).unwrap();
        assert!((e - dn).abs() <= 1e-10 * dn);
        assert!((n - dn).abs() <= 1e-10 * dn);
    }
}
