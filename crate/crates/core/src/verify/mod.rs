//! Executable bindings of the library's guarantees: frame bounds,
//! permutation invariance, nonexpansiveness, telescoping, oracle
//! equivalences, and finite-difference gradient parities. Consumed by the
//! `check` subcommand and by the test harness.

mod dense;
mod samplers;

pub use dense::{dense_features, dense_powers, dense_responses, dense_walk_matrix};
pub use samplers::{
    sample_disjoint_ordered_selection, sample_graph, sample_scales, sample_signal, GraphFamily,
};

use nalgebra::DVector;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autograd::{backward_theta, fd_check, grad_adjacency_paper, softmax_row_jacobian};
use crate::data_io::{clustering_coefficient, eccentricity};
use crate::error::Result;
use crate::filter_bank::{apply_bank, dyadic_scales, frame_energy, frame_lower_constant, ScaleSequence};
use crate::graph::{
    build_graph, diffusion_cascade, lazy_step, spectral_oracle, weighted_norm_sq, Graph,
    IsolatedPolicy, SignalMatrix,
};
use crate::heads::{loss, FcnHead, LossKind, LossSpec, RbfHead, Target};
use crate::legs::{
    check_nonexpansive, init_theta, legs_apply, selection_matrix, InitScheme, SelectionMatrix,
    SelectionParams,
};
use crate::rng::{mix, substream};
use crate::scattering::{transform, Bank, PathRule, ScatteringConfig};

/// Deliberate defects for exercising the failure path of the checker.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultMode {
    None,
    /// Flip the sign of the first band-pass response before checking.
    FlipPsiSign,
}

/// The properties the suite can execute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PropertyKind {
    MassConservation,
    DegreeFixedPoint,
    CascadeDenseOracle,
    SpectrumRange,
    TelescopingFixed,
    TelescopingLegs,
    FrameBounds,
    DyadicEquivalence,
    PermutationNode,
    PermutationGraph,
    OneHotReduction,
    NonexpansiveDisjoint,
    SoftmaxJacobianRows,
    FdTheta,
    FdHeads,
    FdAdjacency,
    EccentricityOracle,
    ClusteringOracle,
}

impl PropertyKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::MassConservation => "mass-conservation",
            Self::DegreeFixedPoint => "degree-fixed-point",
            Self::CascadeDenseOracle => "cascade-dense-oracle",
            Self::SpectrumRange => "spectrum-range",
            Self::TelescopingFixed => "telescoping-fixed",
            Self::TelescopingLegs => "telescoping-legs",
            Self::FrameBounds => "frame-bounds",
            Self::DyadicEquivalence => "dyadic-equivalence",
            Self::PermutationNode => "permutation-node",
            Self::PermutationGraph => "permutation-graph",
            Self::OneHotReduction => "one-hot-reduction",
            Self::NonexpansiveDisjoint => "nonexpansive-disjoint",
            Self::SoftmaxJacobianRows => "softmax-jacobian-rows",
            Self::FdTheta => "fd-theta",
            Self::FdHeads => "fd-heads",
            Self::FdAdjacency => "fd-adjacency",
            Self::EccentricityOracle => "eccentricity-oracle",
            Self::ClusteringOracle => "clustering-oracle",
        }
    }
}

/// One property run: sampler settings, trial count, and the pass tolerance
/// on the worst observed margin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertySpec {
    pub kind: PropertyKind,
    pub trials: usize,
    pub tolerance: f64,
    pub seed: u64,
    pub size_range: (usize, usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyReport {
    pub name: String,
    pub trials: usize,
    pub tolerance: f64,
    /// Worst observed margin, scaled so it compares against `tolerance`.
    pub worst: f64,
    pub pass: bool,
}

/// The default suite covering every stated guarantee.
pub fn default_suite(seed: u64) -> Vec<PropertySpec> {
    let spec = |kind, trials, tolerance| PropertySpec {
        kind,
        trials,
        tolerance,
        seed: mix(seed, &[kind as u64]),
        size_range: (5, 50),
    };
    vec![
        spec(PropertyKind::MassConservation, 1000, 1e-10),
        spec(PropertyKind::DegreeFixedPoint, 500, 1e-12),
        spec(PropertyKind::CascadeDenseOracle, 200, 1e-10),
        spec(PropertyKind::SpectrumRange, 150, 1e-10),
        spec(PropertyKind::TelescopingFixed, 500, 1e-10),
        spec(PropertyKind::TelescopingLegs, 500, 1e-10),
        spec(PropertyKind::FrameBounds, 1000, 1e-9),
        spec(PropertyKind::DyadicEquivalence, 200, 1e-15),
        spec(PropertyKind::PermutationNode, 500, 1e-10),
        spec(PropertyKind::PermutationGraph, 500, 1e-10),
        spec(PropertyKind::OneHotReduction, 200, 1e-12),
        spec(PropertyKind::NonexpansiveDisjoint, 1000, 1e-10),
        spec(PropertyKind::SoftmaxJacobianRows, 500, 1e-14),
        spec(PropertyKind::FdTheta, 100, 1e-4),
        spec(PropertyKind::FdHeads, 100, 1e-4),
        spec(PropertyKind::FdAdjacency, 100, 1e-6),
        spec(PropertyKind::EccentricityOracle, 200, 1e-12),
        spec(PropertyKind::ClusteringOracle, 200, 1e-12),
    ]
}

/// Runs every spec, properties in parallel, each internally deterministic.
pub fn run_suite(specs: &[PropertySpec], fault: FaultMode) -> Result<Vec<PropertyReport>> {
    specs
        .par_iter()
        .map(|s| run_property(s, fault))
        .collect()
}

/// Executes one property and reports the worst-case margin.
pub fn run_property(spec: &PropertySpec, fault: FaultMode) -> Result<PropertyReport> {
    assert!(spec.trials >= 100, "property runs need at least 100 trials");
    assert!(spec.tolerance > 0.0, "tolerance must be positive");
    let worst = match spec.kind {
        PropertyKind::MassConservation => mass_conservation(spec)?,
        PropertyKind::DegreeFixedPoint => degree_fixed_point(spec)?,
        PropertyKind::CascadeDenseOracle => cascade_dense_oracle(spec)?,
        PropertyKind::SpectrumRange => spectrum_range(spec)?,
        PropertyKind::TelescopingFixed => telescoping_fixed(spec, fault)?,
        PropertyKind::TelescopingLegs => telescoping_legs(spec, fault)?,
        PropertyKind::FrameBounds => frame_bounds(spec)?,
        PropertyKind::DyadicEquivalence => dyadic_equivalence(spec)?,
        PropertyKind::PermutationNode => permutation_node(spec)?,
        PropertyKind::PermutationGraph => permutation_graph(spec)?,
        PropertyKind::OneHotReduction => one_hot_reduction(spec)?,
        PropertyKind::NonexpansiveDisjoint => nonexpansive_disjoint(spec)?,
        PropertyKind::SoftmaxJacobianRows => softmax_jacobian_rows(spec)?,
        PropertyKind::FdTheta => fd_theta(spec)?,
        PropertyKind::FdHeads => fd_heads(spec)?,
        PropertyKind::FdAdjacency => fd_adjacency(spec)?,
        PropertyKind::EccentricityOracle => eccentricity_oracle(spec)?,
        PropertyKind::ClusteringOracle => clustering_oracle(spec)?,
    };
    Ok(PropertyReport {
        name: spec.kind.name().to_string(),
        trials: spec.trials,
        tolerance: spec.tolerance,
        worst,
        pass: worst <= spec.tolerance,
    })
}

/// Relabels the graph by `perm` (new index of node i is `perm[i]`).
pub fn permute_graph(g: &Graph, perm: &[usize]) -> Result<Graph> {
    let edges: Vec<(usize, usize, f64)> = g
        .edges()
        .iter()
        .filter(|&&(i, j, _)| i != j)
        .map(|&(i, j, w)| {
            let (a, b) = (perm[i], perm[j]);
            (a.min(b), a.max(b), w)
        })
        .collect();
    build_graph(g.n(), &edges, IsolatedPolicy::SelfLoop)
}

/// Applies the same relabeling to a signal.
pub fn permute_signal(x: &SignalMatrix, perm: &[usize]) -> SignalMatrix {
    let mut out = SignalMatrix::zeros(x.n(), x.channels());
    for c in 0..x.channels() {
        let src = x.column(c);
        let dst = out.column_mut(c);
        for (i, &v) in src.iter().enumerate() {
            dst[perm[i]] = v;
        }
    }
    out
}

fn mass_conservation(spec: &PropertySpec) -> Result<f64> {
    let mut rng = substream(spec.seed, spec.kind.name());
    let mut worst = 0.0f64;
    for trial in 0..spec.trials {
        let g = sample_graph(trial, spec.size_range, &mut rng);
        let x = sample_signal(trial, &g, &mut rng);
        let alpha = rng.random_range(0.05..0.95);
        let y = lazy_step(&g, alpha, &x)?;
        let before: f64 = x.column(0).iter().sum();
        let after: f64 = y.column(0).iter().sum();
        let l1: f64 = x.column(0).iter().map(|v| v.abs()).sum();
        worst = worst.max((before - after).abs() / l1.max(1e-12));
    }
    Ok(worst)
}

fn degree_fixed_point(spec: &PropertySpec) -> Result<f64> {
    let mut rng = substream(spec.seed, spec.kind.name());
    let mut worst = 0.0f64;
    for trial in 0..spec.trials {
        let g = sample_graph(trial, spec.size_range, &mut rng);
        let d = SignalMatrix::from_column(g.degree().to_vec());
        let alpha = rng.random_range(0.05..0.95);
        let cascade = diffusion_cascade(&g, alpha, &d, 8)?;
        for t in 1..=8 {
            worst = worst.max(cascade.step(t).max_abs_diff(&d) / d.max_abs());
        }
    }
    Ok(worst)
}

fn cascade_dense_oracle(spec: &PropertySpec) -> Result<f64> {
    let mut rng = substream(spec.seed, spec.kind.name());
    let mut worst = 0.0f64;
    for trial in 0..spec.trials {
        let g = sample_graph(trial, spec.size_range, &mut rng);
        let x = sample_signal(trial, &g, &mut rng);
        let alpha = rng.random_range(0.3..0.9);
        let m = rng.random_range(1..=16);
        let cascade = diffusion_cascade(&g, alpha, &x, m)?;
        let p = dense_walk_matrix(&g, alpha);
        let xd = DVector::from_column_slice(x.column(0));
        let powers = dense_powers(&p, &xd, m);
        let scale = x.max_abs().max(1e-12);
        for t in 1..=m {
            let sparse = cascade.step(t).column(0);
            let diff = sparse
                .iter()
                .zip(powers[t - 1].iter())
                .fold(0.0f64, |acc, (a, b)| acc.max((a - b).abs()));
            worst = worst.max(diff / scale);
        }
    }
    Ok(worst)
}

fn spectrum_range(spec: &PropertySpec) -> Result<f64> {
    let mut rng = substream(spec.seed, spec.kind.name());
    let mut worst = 0.0f64;
    for trial in 0..spec.trials {
        let g = sample_graph(trial, spec.size_range, &mut rng);
        let alpha = rng.random_range(0.5..1.0);
        let oracle = spectral_oracle(&g, alpha, 256)?;
        let hi = oracle.eigenvalues[0];
        let lo = oracle.eigenvalues[oracle.eigenvalues.len() - 1];
        worst = worst.max(hi - 1.0).max((2.0 * alpha - 1.0) - lo);
    }
    Ok(worst)
}

fn apply_fault(responses: &mut crate::filter_bank::FilterResponses, fault: FaultMode) {
    if fault == FaultMode::FlipPsiSign {
        responses.psi[0].scale(-1.0);
    }
}

fn telescoping_fixed(spec: &PropertySpec, fault: FaultMode) -> Result<f64> {
    let mut rng = substream(spec.seed, spec.kind.name());
    let mut worst = 0.0f64;
    for trial in 0..spec.trials {
        let g = sample_graph(trial, spec.size_range, &mut rng);
        let x = sample_signal(trial, &g, &mut rng);
        let m = 16;
        let scales = ScaleSequence::new(sample_scales(m, &mut rng), m)?;
        let cascade = diffusion_cascade(&g, 0.5, &x, m)?;
        let mut responses = apply_bank(&cascade, &scales, &x)?;
        apply_fault(&mut responses, fault);
        let err = responses.telescoping_sum().max_abs_diff(&x);
        worst = worst.max(err / x.max_abs().max(1.0));
    }
    Ok(worst)
}

fn telescoping_legs(spec: &PropertySpec, fault: FaultMode) -> Result<f64> {
    let mut rng = substream(spec.seed, spec.kind.name());
    let mut worst = 0.0f64;
    for trial in 0..spec.trials {
        let g = sample_graph(trial, spec.size_range, &mut rng);
        let x = sample_signal(trial, &g, &mut rng);
        let m = 12;
        let j = rng.random_range(2..=4);
        let params = init_theta(j, m, InitScheme::Random { seed: rng.random() })?;
        let selection = selection_matrix(&params)?;
        let cascade = diffusion_cascade(&g, 0.5, &x, m)?;
        let mut responses = legs_apply(&selection, &cascade, &x)?;
        apply_fault(&mut responses, fault);
        let err = responses.telescoping_sum().max_abs_diff(&x);
        worst = worst.max(err / x.max_abs().max(1.0));
    }
    Ok(worst)
}

fn frame_bounds(spec: &PropertySpec) -> Result<f64> {
    let mut rng = substream(spec.seed, spec.kind.name());
    let mut worst = f64::NEG_INFINITY;
    for trial in 0..spec.trials {
        let g = sample_graph(trial, spec.size_range, &mut rng);
        let x = sample_signal(trial, &g, &mut rng);
        let m = 16;
        let scales_vec = sample_scales(m, &mut rng);
        let c = frame_lower_constant(scales_vec[0], *scales_vec.last().unwrap())?;
        let scales = ScaleSequence::new(scales_vec, m)?;
        let cascade = diffusion_cascade(&g, 0.5, &x, m)?;
        let responses = apply_bank(&cascade, &scales, &x)?;
        let (energy, _) = frame_energy(&g, &responses)?;
        let norm_sq = weighted_norm_sq(&g, &x)?;
        // Margins are positive exactly when a bound is violated.
        worst = worst.max(c * norm_sq - energy).max(energy - norm_sq);
    }
    Ok(worst)
}

fn dyadic_equivalence(spec: &PropertySpec) -> Result<f64> {
    let mut rng = substream(spec.seed, spec.kind.name());
    let mut worst = 0.0f64;
    for trial in 0..spec.trials {
        let g = sample_graph(trial, spec.size_range, &mut rng);
        let x = sample_signal(trial, &g, &mut rng);
        let j_max = rng.random_range(0..=4);
        let m = 1 << j_max;
        let scales = dyadic_scales(j_max, m)?;
        let cascade = diffusion_cascade(&g, 0.5, &x, m)?;
        let responses = apply_bank(&cascade, &scales, &x)?;
        // Direct dyadic construction from its own cascade.
        let direct = diffusion_cascade(&g, 0.5, &x, m)?;
        let psi0 = x.sub(direct.step(1));
        worst = worst.max(responses.psi[0].max_abs_diff(&psi0));
        for jx in 1..=j_max {
            let expected = direct.step(1 << (jx - 1)).sub(direct.step(1 << jx));
            worst = worst.max(responses.psi[jx].max_abs_diff(&expected));
        }
        worst = worst.max(responses.phi.max_abs_diff(direct.step(1 << j_max)));
    }
    Ok(worst)
}

fn permutation_setup(
    trial: usize,
    spec: &PropertySpec,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> Result<(Graph, Graph, Vec<usize>, SignalMatrix, SignalMatrix, ScatteringConfig, SelectionMatrix)>
{
    let (lo, hi) = spec.size_range;
    let g = sample_graph(trial, (lo, hi.min(30)), rng);
    let mut x = SignalMatrix::zeros(g.n(), 1);
    for v in x.column_mut(0) {
        *v = StandardNormal.sample(rng);
    }
    let mut perm: Vec<usize> = (0..g.n()).collect();
    perm.shuffle(rng);
    let gp = permute_graph(&g, &perm)?;
    let xp = permute_signal(&x, &perm);
    let m = 8;
    let j = rng.random_range(2..=3);
    let cfg = ScatteringConfig {
        j,
        m,
        q_max: 3,
        order: 2,
        path_rule: PathRule::Increasing,
        normalize_moments: true,
        alpha: 0.5,
    };
    let scales = ScaleSequence::new(sample_scales_with_len(j, m, rng), m)?;
    let selection = SelectionMatrix::one_hot(&scales);
    Ok((g, gp, perm, x, xp, cfg, selection))
}

fn sample_scales_with_len(j: usize, m: usize, rng: &mut rand_chacha::ChaCha8Rng) -> Vec<usize> {
    let mut scales: Vec<usize> = Vec::new();
    while scales.len() < j {
        let t = rng.random_range(1..=m);
        if !scales.contains(&t) {
            scales.push(t);
        }
    }
    scales.sort_unstable();
    scales
}

fn permutation_node(spec: &PropertySpec) -> Result<f64> {
    let mut rng = substream(spec.seed, spec.kind.name());
    let mut worst = 0.0f64;
    for trial in 0..spec.trials {
        let (g, gp, perm, x, xp, cfg, selection) = permutation_setup(trial, spec, &mut rng)?;
        let a = transform(&g, &x, Bank::Legs(&selection), &cfg, true)?;
        let b = transform(&gp, &xp, Bank::Legs(&selection), &cfg, true)?;
        let ta = a.trace.as_ref().unwrap();
        let tb = b.trace.as_ref().unwrap();
        let scale = x.max_abs().max(1e-12);
        for ((_, loc_a), (_, loc_b)) in ta.path_locations.iter().zip(&tb.path_locations) {
            let ua = ta.path_output(*loc_a);
            let ub = tb.path_output(*loc_b);
            let permuted = permute_signal(ua, &perm);
            worst = worst.max(permuted.max_abs_diff(ub) / scale);
        }
    }
    Ok(worst)
}

fn permutation_graph(spec: &PropertySpec) -> Result<f64> {
    let mut rng = substream(spec.seed, spec.kind.name());
    let mut worst = 0.0f64;
    for trial in 0..spec.trials {
        let (g, gp, _, x, xp, cfg, selection) = permutation_setup(trial, spec, &mut rng)?;
        let a = transform(&g, &x, Bank::Legs(&selection), &cfg, false)?;
        let b = transform(&gp, &xp, Bank::Legs(&selection), &cfg, false)?;
        for (va, vb) in a.values.iter().zip(&b.values) {
            let denom = va.abs().max(vb.abs()).max(1e-12);
            worst = worst.max((va - vb).abs() / denom);
        }
    }
    Ok(worst)
}

fn one_hot_reduction(spec: &PropertySpec) -> Result<f64> {
    let mut rng = substream(spec.seed, spec.kind.name());
    let mut worst = 0.0f64;
    for trial in 0..spec.trials {
        let g = sample_graph(trial, spec.size_range, &mut rng);
        let x = sample_signal(trial, &g, &mut rng);
        let m = 12;
        let scales = ScaleSequence::new(sample_scales(m, &mut rng), m)?;
        let cascade = diffusion_cascade(&g, 0.5, &x, m)?;
        let fixed = apply_bank(&cascade, &scales, &x)?;
        let relaxed = legs_apply(&SelectionMatrix::one_hot(&scales), &cascade, &x)?;
        for (a, b) in fixed.psi.iter().zip(&relaxed.psi) {
            worst = worst.max(a.max_abs_diff(b));
        }
        worst = worst.max(fixed.phi.max_abs_diff(&relaxed.phi));
    }
    Ok(worst)
}

fn nonexpansive_disjoint(spec: &PropertySpec) -> Result<f64> {
    let mut rng = substream(spec.seed, spec.kind.name());
    let mut worst = f64::NEG_INFINITY;
    let signals_per_case = 5;
    let cases = spec.trials.div_ceil(signals_per_case);
    for case in 0..cases {
        let g = sample_graph(case, (spec.size_range.0, spec.size_range.1.min(30)), &mut rng);
        let m = 12;
        let j = rng.random_range(2..=4);
        let selection = sample_disjoint_ordered_selection(j, m, &mut rng);
        let report = check_nonexpansive(&selection, 1e-3, &g, signals_per_case, rng.random())?;
        assert!(report.support_ok, "sampler must produce ordered supports");
        worst = worst.max(report.max_energy_ratio - 1.0);
    }
    Ok(worst)
}

fn softmax_jacobian_rows(spec: &PropertySpec) -> Result<f64> {
    let mut rng = substream(spec.seed, spec.kind.name());
    let mut worst = 0.0f64;
    for trial in 0..spec.trials {
        let m = rng.random_range(2..=16);
        let scale = [1.0, 10.0, 100.0, 600.0][trial % 4];
        let row: Vec<f64> = (0..m)
            .map(|_| rng.random_range(-1.0..1.0) * scale)
            .collect();
        let jac = softmax_row_jacobian(&row)?;
        for r in &jac {
            worst = worst.max(r.iter().sum::<f64>().abs());
        }
        // Softmax rows themselves stay on the simplex at any magnitude.
        let params = SelectionParams {
            theta: row,
            j: 1,
            m,
        };
        let sel = selection_matrix(&params)?;
        let sum: f64 = sel.row(0).iter().sum();
        assert!((sum - 1.0).abs() <= 1e-12, "softmax row sum {sum}");
    }
    Ok(worst)
}

/// Samples a small trainable instance with a kink-free signal for FD work.
/// Structurally exact zeros (isolated self-loop nodes, where every filter
/// output vanishes identically) are fine: both the subgradient and the
/// central difference are zero there. Entries merely close to zero would
/// put the FD step across the absolute-value kink, so those instances are
/// resampled wholesale.
fn fd_instance(
    rng: &mut rand_chacha::ChaCha8Rng,
) -> Result<(Graph, SignalMatrix, ScatteringConfig, SelectionParams)> {
    for _ in 0..200 {
        let n = rng.random_range(6..=12);
        let g = crate::data_io::er_graph(n, 0.5, rng);
        let m = rng.random_range(4..=8);
        let j = rng.random_range(2..=4.min(m));
        let cfg = ScatteringConfig {
            j,
            m,
            q_max: 2,
            order: 2,
            path_rule: PathRule::Increasing,
            normalize_moments: true,
            alpha: 0.5,
        };
        let params = init_theta(j, m, InitScheme::Random { seed: rng.random() })?;
        let mut x = SignalMatrix::zeros(n, 1);
        for v in x.column_mut(0) {
            *v = StandardNormal.sample(rng);
        }
        let selection = selection_matrix(&params)?;
        let f = transform(&g, &x, Bank::Legs(&selection), &cfg, true)?;
        let trace = f.trace.as_ref().unwrap();
        let clear = trace.path_locations.iter().all(|(_, loc)| {
            trace
                .path_output(*loc)
                .data()
                .iter()
                .all(|v| *v == 0.0 || v.abs() >= 1e-6)
        });
        if clear {
            return Ok((g, x, cfg, params));
        }
    }
    panic!("could not sample a kink-free instance");
}

fn fd_theta(spec: &PropertySpec) -> Result<f64> {
    let mut rng = substream(spec.seed, spec.kind.name());
    let mut worst = 0.0f64;
    for _ in 0..spec.trials {
        let (g, x, cfg, params) = fd_instance(&mut rng)?;
        let selection = selection_matrix(&params)?;
        let f = transform(&g, &x, Bank::Legs(&selection), &cfg, true)?;
        let weights: Vec<f64> = (0..f.values.len())
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        let analytic = backward_theta(&g, cfg.alpha, f.trace.as_ref().unwrap(), &weights)?;
        let loss_fn = |theta_flat: &[f64]| -> f64 {
            let p = SelectionParams {
                theta: theta_flat.to_vec(),
                j: params.j,
                m: params.m,
            };
            let s = selection_matrix(&p).unwrap();
            let out = transform(&g, &x, Bank::Legs(&s), &cfg, false).unwrap();
            out.values.iter().zip(&weights).map(|(a, b)| a * b).sum()
        };
        worst = worst.max(fd_check(loss_fn, &params.theta, 1e-5, &analytic));
    }
    Ok(worst)
}

fn fd_heads(spec: &PropertySpec) -> Result<f64> {
    let mut rng = substream(spec.seed, spec.kind.name());
    let mut worst = 0.0f64;
    for trial in 0..spec.trials {
        match trial % 3 {
            0 => {
                // FCN with cross-entropy, away from rectifier kinks.
                let head = FcnHead::new(5, 6, 3, rng.random());
                let x: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
                let spec_l = LossSpec {
                    kind: LossKind::CrossEntropy,
                    width: 3,
                };
                let target = Target::Class(rng.random_range(0..3));
                let (logits, cache) = head.forward_cached(&x)?;
                let (_, d_logits) = loss(&spec_l, &logits, &target)?;
                let (analytic, _) = head.backward(&cache, &d_logits);
                let f = |p: &[f64]| {
                    let mut h = head.clone();
                    h.set_params(p);
                    loss(&spec_l, &h.forward(&x).unwrap(), &target).unwrap().0
                };
                worst = worst.max(fd_check(f, &head.params_flat(), 1e-6, &analytic));
            }
            1 => {
                // RBF in eval mode: batch-norm parameters, anchors, readout.
                // Resample until every anchor activation is well away from
                // underflow; vanishing activations make the true gradients
                // smaller than central-difference roundoff.
                let (head, x) = loop {
                    let mut head = RbfHead::new(3, 4, 2, rng.random());
                    let batch: Vec<Vec<f64>> = (0..10)
                        .map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect())
                        .collect();
                    head.init_anchors(&batch, rng.random())?;
                    let x: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
                    let z = head.bn.forward_eval(&x);
                    let min_activation = (0..head.k)
                        .map(|a| {
                            let anchor = &head.anchors[a * head.in_dim..(a + 1) * head.in_dim];
                            let dist_sq: f64 = z
                                .iter()
                                .zip(anchor)
                                .map(|(zi, ci)| (zi - ci) * (zi - ci))
                                .sum();
                            (-dist_sq).exp()
                        })
                        .fold(f64::INFINITY, f64::min);
                    if min_activation >= 1e-4 {
                        break (head, x);
                    }
                };
                let spec_l = LossSpec {
                    kind: LossKind::CrossEntropy,
                    width: 2,
                };
                let target = Target::Class(rng.random_range(0..2));
                let logits = head.forward_eval(&x)?;
                let (_, d_logits) = loss(&spec_l, &logits, &target)?;
                let (analytic, _) = head.backward_eval(&x, &d_logits);
                let f = |p: &[f64]| {
                    let mut h = head.clone();
                    h.set_params(p);
                    loss(&spec_l, &h.forward_eval(&x).unwrap(), &target)
                        .unwrap()
                        .0
                };
                worst = worst.max(fd_check(f, &head.params_flat(), 1e-5, &analytic));
            }
            _ => {
                // Loss adjoints themselves.
                let logits: Vec<f64> = (0..4).map(|_| rng.random_range(-2.0..2.0)).collect();
                let target = Target::Class(rng.random_range(0..4));
                let spec_ce = LossSpec {
                    kind: LossKind::CrossEntropy,
                    width: 4,
                };
                let (_, d) = loss(&spec_ce, &logits, &target)?;
                let f = |p: &[f64]| loss(&spec_ce, p, &target).unwrap().0;
                worst = worst.max(fd_check(f, &logits, 1e-6, &d));

                let t = Target::Regression((0..4).map(|_| rng.random_range(-1.0..1.0)).collect());
                let spec_mse = LossSpec {
                    kind: LossKind::MeanSquaredError,
                    width: 4,
                };
                let (_, d) = loss(&spec_mse, &logits, &t)?;
                let f = |p: &[f64]| loss(&spec_mse, p, &t).unwrap().0;
                worst = worst.max(fd_check(f, &logits, 1e-6, &d));
            }
        }
    }
    Ok(worst)
}

/// Smallest nonzero magnitude across every node-level path output; exact
/// zeros do not count (sign(0) = 0 matches the symmetric difference).
pub fn min_kink_clearance(trace: &crate::scattering::ForwardTrace) -> f64 {
    trace
        .path_locations
        .iter()
        .flat_map(|(_, loc)| trace.path_output(*loc).data().iter())
        .filter(|v| **v != 0.0)
        .fold(f64::INFINITY, |acc, v| acc.min(v.abs()))
}

fn fd_adjacency(spec: &PropertySpec) -> Result<f64> {
    let mut rng = substream(spec.seed, spec.kind.name());
    let mut worst = 0.0f64;
    for _ in 0..spec.trials {
        // Adjacency perturbations move filter outputs with order-one
        // sensitivity, so the kink clearance must dominate the FD step.
        let (g, x, cfg, selection, f) = loop {
            let n = rng.random_range(5..=8);
            let g = crate::data_io::er_graph(n, 0.6, &mut rng);
            let m = rng.random_range(3..=6);
            let j = rng.random_range(2..=3.min(m));
            let cfg = ScatteringConfig {
                j,
                m,
                q_max: 2,
                order: 2,
                path_rule: PathRule::Increasing,
                normalize_moments: true,
                alpha: 0.5,
            };
            let params = init_theta(j, m, InitScheme::Random { seed: rng.random() })?;
            let selection = selection_matrix(&params)?;
            let mut x = SignalMatrix::zeros(n, 1);
            for v in x.column_mut(0) {
                *v = StandardNormal.sample(&mut rng);
            }
            let f = transform(&g, &x, Bank::Legs(&selection), &cfg, true)?;
            if min_kink_clearance(f.trace.as_ref().unwrap()) >= 1e-3 {
                break (g, x, cfg, selection, f);
            }
        };
        let weights: Vec<f64> = (0..f.values.len())
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        let analytic =
            grad_adjacency_paper(&g, cfg.alpha, f.trace.as_ref().unwrap(), &weights, 256)?;

        // FD along the stated perturbation direction: P + eps * J^{ab} D^{-1},
        // evaluated with the dense pipeline replica.
        let p0 = dense_walk_matrix(&g, cfg.alpha);
        let xd = DVector::from_column_slice(x.column(0));
        let degree = g.degree().to_vec();
        let entries: Vec<usize> = {
            let mut idx: Vec<usize> = (0..analytic.len()).collect();
            idx.shuffle(&mut rng);
            idx.truncate(2);
            idx
        };
        for idx in entries {
            let (a, b, grad) = analytic[idx];
            let h = 1e-5;
            let eval = |eps: f64| -> f64 {
                let mut p = p0.clone();
                p[(a, b)] += eps / degree[b];
                let values = dense_features(
                    &p,
                    &selection,
                    &xd,
                    cfg.order,
                    cfg.path_rule,
                    cfg.q_max,
                    cfg.normalize_moments,
                );
                values.iter().zip(&weights).map(|(v, w)| v * w).sum()
            };
            let fd = (eval(h) - eval(-h)) / (2.0 * h);
            let denom = grad.abs().max(fd.abs()).max(1e-12);
            worst = worst.max((fd - grad).abs() / denom);
        }
    }
    Ok(worst)
}

fn eccentricity_oracle(spec: &PropertySpec) -> Result<f64> {
    let mut rng = substream(spec.seed, spec.kind.name());
    let mut worst = 0.0f64;
    for trial in 0..spec.trials {
        let g = sample_graph(trial, spec.size_range, &mut rng);
        let fast = eccentricity(&g);
        let slow = floyd_warshall_eccentricity(&g);
        for (a, b) in fast.iter().zip(&slow) {
            worst = worst.max((a - b).abs());
        }
    }
    Ok(worst)
}

/// All-pairs oracle: dense Floyd-Warshall, per-component row maxima.
pub fn floyd_warshall_eccentricity(g: &Graph) -> Vec<f64> {
    let n = g.n();
    let inf = f64::INFINITY;
    let mut dist = vec![inf; n * n];
    for i in 0..n {
        dist[i * n + i] = 0.0;
    }
    for (i, j, _) in g.pattern() {
        if i != j {
            dist[i * n + j] = 1.0;
        }
    }
    for k in 0..n {
        for i in 0..n {
            let dik = dist[i * n + k];
            if dik == inf {
                continue;
            }
            for j in 0..n {
                let alt = dik + dist[k * n + j];
                if alt < dist[i * n + j] {
                    dist[i * n + j] = alt;
                }
            }
        }
    }
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| dist[i * n + j])
                .filter(|d| d.is_finite())
                .fold(0.0f64, f64::max)
        })
        .collect()
}

fn clustering_oracle(spec: &PropertySpec) -> Result<f64> {
    let mut rng = substream(spec.seed, spec.kind.name());
    let mut worst = 0.0f64;
    for trial in 0..spec.trials {
        let g = sample_graph(trial, (spec.size_range.0, spec.size_range.1.min(30)), &mut rng);
        let fast = clustering_coefficient(&g);
        let slow = brute_force_clustering(&g);
        for (a, b) in fast.iter().zip(&slow) {
            assert!((0.0..=1.0).contains(a), "clustering out of range");
            worst = worst.max((a - b).abs());
        }
    }
    Ok(worst)
}

/// Cubic triple-enumeration oracle on the dense binarized adjacency.
pub fn brute_force_clustering(g: &Graph) -> Vec<f64> {
    let n = g.n();
    let mut adj = vec![false; n * n];
    for (i, j, _) in g.pattern() {
        if i != j {
            adj[i * n + j] = true;
        }
    }
    (0..n)
        .map(|i| {
            let nbrs: Vec<usize> = (0..n).filter(|&j| adj[i * n + j]).collect();
            if nbrs.len() < 2 {
                return 0.0;
            }
            let mut links = 0usize;
            for a in 0..nbrs.len() {
                for b in a + 1..nbrs.len() {
                    if adj[nbrs[a] * n + nbrs[b]] {
                        links += 1;
                    }
                }
            }
            2.0 * links as f64 / (nbrs.len() * (nbrs.len() - 1)) as f64
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick(kind: PropertyKind, trials: usize, tolerance: f64) -> PropertySpec {
        PropertySpec {
            kind,
            trials,
            tolerance,
            seed: 17,
            size_range: (5, 20),
        }
    }

    #[test]
    fn core_properties_pass_smoke() {
        for kind in [
            PropertyKind::MassConservation,
            PropertyKind::DegreeFixedPoint,
            PropertyKind::TelescopingFixed,
            PropertyKind::TelescopingLegs,
            PropertyKind::OneHotReduction,
            PropertyKind::SoftmaxJacobianRows,
        ] {
            let spec = quick(kind, 100, default_tolerance(kind));
            let report = run_property(&spec, FaultMode::None).unwrap();
            assert!(report.pass, "{} worst {}", report.name, report.worst);
        }
    }

    fn default_tolerance(kind: PropertyKind) -> f64 {
        default_suite(0)
            .into_iter()
            .find(|s| s.kind == kind)
            .unwrap()
            .tolerance
    }

    #[test]
    fn fault_injection_fails_telescoping() {
        let spec = quick(PropertyKind::TelescopingFixed, 100, 1e-10);
        let report = run_property(&spec, FaultMode::FlipPsiSign).unwrap();
        assert!(!report.pass);
        assert!(report.worst > 1e-3);
    }

    #[test]
    fn permutation_helpers_roundtrip() {
        let g = crate::data_io::cycle_graph(6);
        let perm = vec![2, 3, 4, 5, 0, 1];
        let gp = permute_graph(&g, &perm).unwrap();
        assert_eq!(gp.degree(), g.degree());
        let x = SignalMatrix::from_column(vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let xp = permute_signal(&x, &perm);
        assert_eq!(xp.column(0), &[5.0, 6.0, 1.0, 2.0, 3.0, 4.0]);
    }
}
