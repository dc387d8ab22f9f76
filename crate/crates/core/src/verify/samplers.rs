//! Graph and signal samplers for the property suites: sparse and dense
//! random graphs, cycles, trees, and high-diameter barbells, with normal
//! signals plus the structured degree and all-ones vectors.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::data_io::{barbell_graph, cycle_graph, er_graph, random_tree};
use crate::graph::{Graph, SignalMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraphFamily {
    ErdosRenyi,
    Cycle,
    Tree,
    Barbell,
}

const FAMILIES: [GraphFamily; 4] = [
    GraphFamily::ErdosRenyi,
    GraphFamily::Cycle,
    GraphFamily::Tree,
    GraphFamily::Barbell,
];

/// Samples one graph, cycling through families by trial index.
pub fn sample_graph(trial: usize, size_range: (usize, usize), rng: &mut ChaCha8Rng) -> Graph {
    let (lo, hi) = size_range;
    let n = rng.random_range(lo..=hi);
    match FAMILIES[trial % FAMILIES.len()] {
        GraphFamily::ErdosRenyi => {
            let p = rng.random_range(0.2..0.6);
            er_graph(n, p, rng)
        }
        GraphFamily::Cycle => cycle_graph(n.max(3)),
        GraphFamily::Tree => random_tree(n.max(2), rng),
        GraphFamily::Barbell => {
            let s = (n / 2).clamp(3, 12);
            let bridge = (n / 4).clamp(2, 10);
            barbell_graph(s, bridge)
        }
    }
}

/// Samples a single-channel signal: mostly standard normal, with the degree
/// vector and the all-ones vector mixed in to exercise the fixed points.
pub fn sample_signal(trial: usize, g: &Graph, rng: &mut ChaCha8Rng) -> SignalMatrix {
    match trial % 10 {
        8 => SignalMatrix::from_column(g.degree().to_vec()),
        9 => SignalMatrix::from_column(vec![1.0; g.n()]),
        _ => {
            let mut x = SignalMatrix::zeros(g.n(), 1);
            for v in x.column_mut(0) {
                *v = StandardNormal.sample(rng);
            }
            x
        }
    }
}

/// Strictly increasing random scales within `[1, m]`.
pub fn sample_scales(m: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let count = rng.random_range(1..=4.min(m));
    let mut scales: Vec<usize> = Vec::new();
    while scales.len() < count {
        let t = rng.random_range(1..=m);
        if !scales.contains(&t) {
            scales.push(t);
        }
    }
    scales.sort_unstable();
    scales
}

/// Random row-stochastic selection with ordered disjoint supports: the
/// scale axis is cut into consecutive blocks, one per row, with random
/// mass inside each block.
pub fn sample_disjoint_ordered_selection(
    j: usize,
    m: usize,
    rng: &mut ChaCha8Rng,
) -> crate::legs::SelectionMatrix {
    assert!(j <= m);
    // Random cut points splitting 1..=m into j nonempty consecutive blocks.
    let mut cuts: Vec<usize> = Vec::new();
    while cuts.len() < j - 1 {
        let c = rng.random_range(1..m);
        if !cuts.contains(&c) {
            cuts.push(c);
        }
    }
    cuts.sort_unstable();
    let mut starts = vec![0usize];
    starts.extend(cuts.iter().copied());
    let mut ends = cuts;
    ends.push(m);

    let mut f = vec![0.0; j * m];
    for r in 0..j {
        let (lo, hi) = (starts[r], ends[r]);
        let width = hi - lo;
        // At most three support positions per row keeps rows sparse but
        // genuinely non-one-hot.
        let support = rng.random_range(1..=width.min(3));
        let mut cols: Vec<usize> = Vec::new();
        while cols.len() < support {
            let c = rng.random_range(lo..hi);
            if !cols.contains(&c) {
                cols.push(c);
            }
        }
        let mut mass: Vec<f64> = cols.iter().map(|_| rng.random_range(0.1..1.0)).collect();
        let total: f64 = mass.iter().sum();
        for w in &mut mass {
            *w /= total;
        }
        for (c, w) in cols.iter().zip(mass) {
            f[r * m + c] = w;
        }
    }
    crate::legs::SelectionMatrix::from_stochastic_rows(f, j, m)
        .expect("constructed rows are stochastic")
}
