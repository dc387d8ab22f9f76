//! Filter-bank values frozen against independent dense oracles.

use nalgebra::DVector;
use legs_core::filter_bank::{
    apply_bank, dyadic_scales, frame_lower_constant, ScaleSequence,
};
use legs_core::graph::{build_graph, diffusion_cascade, IsolatedPolicy, SignalMatrix};
use legs_core::legs::SelectionMatrix;
use legs_core::rng::substream;
use legs_core::verify::{dense_responses, dense_walk_matrix, sample_graph, sample_signal};

/// K2 with unit weight, alpha = 1/2: P = [[.5, .5], [.5, .5]] exactly, so
/// the single-scale bank on x = (1, 0) gives psi = (0.5, -0.5) and
/// phi = (0.5, 0.5). Frozen from the 2x2 dense product.
#[test]
fn k2_bank_matches_dense_2x2() {
    let g = build_graph(2, &[(0, 1, 1.0)], IsolatedPolicy::Reject).unwrap();
    let x = SignalMatrix::from_column(vec![1.0, 0.0]);
    let cascade = diffusion_cascade(&g, 0.5, &x, 1).unwrap();
    let scales = ScaleSequence::new(vec![1], 1).unwrap();
    let r = apply_bank(&cascade, &scales, &x).unwrap();

    let p = dense_walk_matrix(&g, 0.5);
    assert!((p[(0, 0)] - 0.5).abs() < 1e-15);
    let xd = DVector::from_column_slice(&[1.0, 0.0]);
    let px = &p * &xd;
    for i in 0..2 {
        assert!((r.psi[0].column(0)[i] - (xd[i] - px[i])).abs() <= 1e-15);
        assert!((r.phi.column(0)[i] - px[i]).abs() <= 1e-15);
    }
}

/// Every filter response equals the dense product (P^{t_j} - P^{t_j+1}) x
/// for graphs up to n = 50.
#[test]
fn responses_match_dense_oracle() {
    let mut rng = substream(101, "filter-oracle");
    for trial in 0..120 {
        let g = sample_graph(trial, (5, 50), &mut rng);
        let x = sample_signal(trial, &g, &mut rng);
        let m = 12;
        let scales = ScaleSequence::new(vec![2, 5, 9], m).unwrap();
        let cascade = diffusion_cascade(&g, 0.5, &x, m).unwrap();
        let sparse = apply_bank(&cascade, &scales, &x).unwrap();

        let p = dense_walk_matrix(&g, 0.5);
        let xd = DVector::from_column_slice(x.column(0));
        let selection = SelectionMatrix::one_hot(&scales);
        let (psi_d, phi_d) = dense_responses(&p, &selection, &xd);
        let scale = x.max_abs().max(1e-12);
        for (s, d) in sparse.psi.iter().zip(&psi_d) {
            for (a, b) in s.column(0).iter().zip(d.iter()) {
                assert!((a - b).abs() <= 1e-10 * scale);
            }
        }
        for (a, b) in sparse.phi.column(0).iter().zip(phi_d.iter()) {
            assert!((a - b).abs() <= 1e-10 * scale);
        }
    }
}

/// Brute-force grid oracle for the lower frame constant at 1e-6 resolution.
fn grid_oracle(t1: usize, tj: usize) -> f64 {
    let steps = 1_000_000usize;
    let mut best = f64::INFINITY;
    for k in 0..=steps {
        let xi = k as f64 / steps as f64;
        let v = xi.powi(2 * tj as i32) + (1.0 - xi.powi(t1 as i32)).powi(2);
        best = best.min(v);
    }
    best
}

#[test]
fn frame_constant_against_grid_oracle() {
    // Frozen from the 1e-6 grid: C(1,2) minimizes xi^4 + (1 - xi)^2.
    let oracle_12 = grid_oracle(1, 2);
    let c_12 = frame_lower_constant(1, 2).unwrap();
    assert!(
        (c_12 - oracle_12).abs() <= 1e-6,
        "C(1,2) = {c_12}, oracle {oracle_12}"
    );

    for (t1, tj) in [(1, 4), (2, 6), (3, 16), (1, 16)] {
        let c = frame_lower_constant(t1, tj).unwrap();
        let oracle = grid_oracle(t1, tj);
        assert!(
            (c - oracle).abs() <= 1e-6,
            "C({t1},{tj}) = {c}, oracle {oracle}"
        );
        assert!(c > 0.0 && c <= 1.0);
    }
}

#[test]
fn dyadic_bank_is_an_instance_of_the_generalized_bank() {
    let mut rng = substream(77, "dyadic");
    for trial in 0..40 {
        let g = sample_graph(trial, (5, 30), &mut rng);
        let x = sample_signal(trial, &g, &mut rng);
        let scales = dyadic_scales(3, 8).unwrap();
        assert_eq!(scales.scales(), &[1, 2, 4, 8]);
        let cascade = diffusion_cascade(&g, 0.5, &x, 8).unwrap();
        let bank = apply_bank(&cascade, &scales, &x).unwrap();
        // Direct dyadic definition, entry for entry.
        let psi0 = x.sub(cascade.step(1));
        assert_eq!(bank.psi[0].data(), psi0.data());
        for j in 1..=3usize {
            let expected = cascade.step(1 << (j - 1)).sub(cascade.step(1 << j));
            assert_eq!(bank.psi[j].data(), expected.data());
        }
        assert_eq!(bank.phi.data(), cascade.step(8).data());
    }
}
