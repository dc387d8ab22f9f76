//! Property tests for the scattering transform: telescoping, permutation
//! symmetry, and structural invariants over generated graphs.

use proptest::prelude::*;

use legs_core::filter_bank::ScaleSequence;
use legs_core::graph::{build_graph, diffusion_cascade, IsolatedPolicy, SignalMatrix};
use legs_core::legs::{init_theta, legs_apply, selection_matrix, InitScheme, SelectionMatrix};
use legs_core::scattering::{transform, Bank, PathRule, ScatteringConfig};
use legs_core::verify::{permute_graph, permute_signal};

/// Connected-ish random graph: a random tree plus extra random edges.
fn arb_graph() -> impl Strategy<Value = (usize, Vec<(usize, usize, f64)>)> {
    (4usize..24).prop_flat_map(|n| {
        let tree = proptest::collection::vec(0usize..usize::MAX, n - 1);
        let extra = proptest::collection::vec((0usize..n, 0usize..n), 0..n);
        (Just(n), tree, extra).prop_map(|(n, parents, extra)| {
            let mut edges: Vec<(usize, usize, f64)> = (1..n)
                .map(|v| {
                    let p = parents[v - 1] % v;
                    (p, v, 1.0)
                })
                .collect();
            for (a, b) in extra {
                let (i, j) = (a.min(b), a.max(b));
                if i != j && !edges.iter().any(|&(x, y, _)| (x, y) == (i, j)) {
                    edges.push((i, j, 1.0));
                }
            }
            (n, edges)
        })
    })
}

fn arb_signal(n: usize) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(-10.0f64..10.0, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// The bank responses always sum back to the input, for any increasing
    /// scale set.
    #[test]
    fn telescoping_over_random_graphs(
        (n, edges) in arb_graph(),
        raw in proptest::collection::vec(-10.0f64..10.0, 24),
    ) {
        let g = build_graph(n, &edges, IsolatedPolicy::Reject).unwrap();
        let x = SignalMatrix::from_column(raw[..n].to_vec());
        let m = 8;
        let scales = ScaleSequence::new(vec![1, 3, 8], m).unwrap();
        let cascade = diffusion_cascade(&g, 0.5, &x, m).unwrap();
        let r = legs_core::filter_bank::apply_bank(&cascade, &scales, &x).unwrap();
        let err = r.telescoping_sum().max_abs_diff(&x);
        prop_assert!(err <= 1e-10 * x.max_abs().max(1.0));
    }

    /// Softmax selections telescope too, since rows sum to one.
    #[test]
    fn legs_telescoping_over_random_selections(
        (n, edges) in arb_graph(),
        raw in proptest::collection::vec(-10.0f64..10.0, 24),
        seed in any::<u64>(),
    ) {
        let g = build_graph(n, &edges, IsolatedPolicy::Reject).unwrap();
        let x = SignalMatrix::from_column(raw[..n].to_vec());
        let params = init_theta(3, 8, InitScheme::Random { seed }).unwrap();
        let sel = selection_matrix(&params).unwrap();
        let cascade = diffusion_cascade(&g, 0.5, &x, 8).unwrap();
        let r = legs_apply(&sel, &cascade, &x).unwrap();
        let err = r.telescoping_sum().max_abs_diff(&x);
        prop_assert!(err <= 1e-10 * x.max_abs().max(1.0));
    }

    /// Graph-level features are invariant under node relabeling.
    #[test]
    fn features_are_permutation_invariant(
        (n, edges) in arb_graph(),
        raw in proptest::collection::vec(-10.0f64..10.0, 24),
        rotation in 1usize..23,
    ) {
        let g = build_graph(n, &edges, IsolatedPolicy::Reject).unwrap();
        let x = SignalMatrix::from_column(raw[..n].to_vec());
        let perm: Vec<usize> = (0..n).map(|i| (i + rotation) % n).collect();
        let gp = permute_graph(&g, &perm).unwrap();
        let xp = permute_signal(&x, &perm);

        let cfg = ScatteringConfig { j: 2, m: 4, q_max: 3, order: 2, ..Default::default() };
        let scales = ScaleSequence::new(vec![1, 4], 4).unwrap();
        let sel = SelectionMatrix::one_hot(&scales);
        let a = transform(&g, &x, Bank::Legs(&sel), &cfg, false).unwrap();
        let b = transform(&gp, &xp, Bank::Legs(&sel), &cfg, false).unwrap();
        for (va, vb) in a.values.iter().zip(&b.values) {
            let denom = va.abs().max(vb.abs()).max(1e-12);
            prop_assert!((va - vb).abs() / denom <= 1e-10);
        }
    }

    /// Column count is exactly (paths + low-pass) * moments * channels.
    #[test]
    fn feature_count_formula(
        (n, edges) in arb_graph(),
        q_max in 1usize..5,
        order in 1usize..3,
    ) {
        let g = build_graph(n, &edges, IsolatedPolicy::Reject).unwrap();
        let x = SignalMatrix::from_columns(&[vec![1.0; n], (0..n).map(|i| i as f64).collect()]).unwrap();
        let cfg = ScatteringConfig {
            j: 3, m: 8, q_max, order,
            path_rule: PathRule::AllOrdered,
            ..Default::default()
        };
        let scales = ScaleSequence::new(vec![1, 2, 8], 8).unwrap();
        let f = transform(&g, &x, Bank::Fixed(&scales), &cfg, false).unwrap();
        let paths = cfg.paths().unwrap().len();
        prop_assert_eq!(f.values.len(), (paths + 1) * q_max * 2);
        prop_assert_eq!(f.index.len(), f.values.len());
    }
}

/// Node-level equivariance on a fixed but irregular instance.
#[test]
fn node_level_equivariance_explicit() {
    let edges = vec![
        (0, 1, 1.0),
        (1, 2, 2.0),
        (2, 3, 1.0),
        (3, 4, 0.5),
        (0, 4, 1.0),
        (1, 4, 1.0),
        (2, 5, 3.0),
    ];
    let g = build_graph(6, &edges, IsolatedPolicy::Reject).unwrap();
    let x = SignalMatrix::from_column(vec![0.3, -1.2, 0.8, 2.0, -0.5, 1.1]);
    let perm = vec![5, 3, 0, 4, 2, 1];
    let gp = permute_graph(&g, &perm).unwrap();
    let xp = permute_signal(&x, &perm);

    let cfg = ScatteringConfig {
        j: 3,
        m: 8,
        q_max: 2,
        order: 2,
        ..Default::default()
    };
    let scales = ScaleSequence::new(vec![1, 2, 6], 8).unwrap();
    let sel = SelectionMatrix::one_hot(&scales);
    let a = transform(&g, &x, Bank::Legs(&sel), &cfg, true).unwrap();
    let b = transform(&gp, &xp, Bank::Legs(&sel), &cfg, true).unwrap();
    let ta = a.trace.unwrap();
    let tb = b.trace.unwrap();
    for ((pa, loc_a), (_, loc_b)) in ta.path_locations.iter().zip(&tb.path_locations) {
        let ua = permute_signal(ta.path_output(*loc_a), &perm);
        let ub = tb.path_output(*loc_b);
        assert!(
            ua.max_abs_diff(ub) <= 1e-10 * x.max_abs(),
            "path {pa:?} not equivariant"
        );
    }
}
