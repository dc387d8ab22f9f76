//! Scattering cascades and graph-level moment features.
//!
//! Node-level features stack band-pass filters with absolute values in
//! between; graph-level features aggregate them with statistical moments
//! `S_q = sum_i |u_i|^q` (optionally divided by the node count). The
//! transform works over a fixed scale sequence or a learnable selection
//! matrix through one code path.

mod export;
mod paths;

pub use export::{features_csv, index_json};
pub use paths::{enumerate_paths, PathRule, ScatteringPath};

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::filter_bank::{apply_bank, FilterResponses, ScaleSequence};
use crate::graph::{diffusion_cascade, DiffusionCascade, Graph, SignalMatrix};
use crate::legs::{legs_apply, SelectionMatrix};

/// Transform-wide settings. `j` is the number of band-pass filters in the
/// bank (the dyadic default `[1, 2, 4, 8, 16]` has five).
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ScatteringConfig {
    pub j: usize,
    pub m: usize,
    pub q_max: usize,
    pub order: usize,
    pub path_rule: PathRule,
    pub normalize_moments: bool,
    pub alpha: f64,
}

impl Default for ScatteringConfig {
    fn default() -> Self {
        Self {
            j: 5,
            m: 16,
            q_max: 4,
            order: 2,
            path_rule: PathRule::Increasing,
            normalize_moments: true,
            alpha: 0.5,
        }
    }
}

impl ScatteringConfig {
    pub fn validate(&self) -> Result<()> {
        if self.j == 0 || self.j > self.m {
            return Err(Error::InvalidShape {
                j: self.j,
                m: self.m,
            });
        }
        if !(1..=3).contains(&self.order) {
            return Err(Error::UnsupportedOrder { order: self.order });
        }
        assert!(self.q_max >= 1, "q_max must be at least 1");
        assert!(
            self.alpha > 0.0 && self.alpha < 1.0,
            "alpha must lie in (0, 1)"
        );
        Ok(())
    }

    /// The fixed dyadic bank matching this configuration:
    /// scales `[2^0, ..., 2^(j-1)]`.
    pub fn dyadic_bank(&self) -> Result<ScaleSequence> {
        crate::filter_bank::dyadic_scales(self.j - 1, self.m)
    }

    pub fn paths(&self) -> Result<Vec<ScatteringPath>> {
        enumerate_paths(self.j, self.order, self.path_rule)
    }

    /// Features per input channel: (paths + low-pass) x moments.
    pub fn features_per_channel(&self) -> Result<usize> {
        Ok((self.paths()?.len() + 1) * self.q_max)
    }
}

/// A filter bank to scatter with: fixed scales or a learned selection.
#[derive(Debug, Clone, Copy)]
pub enum Bank<'a> {
    Fixed(&'a ScaleSequence),
    Legs(&'a SelectionMatrix),
}

impl<'a> Bank<'a> {
    pub fn wavelet_count(&self) -> usize {
        match self {
            Bank::Fixed(s) => s.wavelet_count(),
            Bank::Legs(sel) => sel.j(),
        }
    }

    pub fn m(&self) -> usize {
        match self {
            Bank::Fixed(s) => s.m(),
            Bank::Legs(sel) => sel.m(),
        }
    }

    fn apply(&self, cascade: &DiffusionCascade, x: &SignalMatrix) -> Result<FilterResponses> {
        match self {
            Bank::Fixed(s) => apply_bank(cascade, s, x),
            Bank::Legs(sel) => legs_apply(sel, cascade, x),
        }
    }
}

/// Applies one bank repeatedly, rebuilding a diffusion cascade for each new
/// input signal (the absolute values between cascade stages).
pub struct BankApplicator<'g, 'b> {
    pub graph: &'g Graph,
    pub bank: Bank<'b>,
    pub alpha: f64,
}

impl<'g, 'b> BankApplicator<'g, 'b> {
    pub fn responses(&self, x: &SignalMatrix) -> Result<(DiffusionCascade, FilterResponses)> {
        let cascade = diffusion_cascade(self.graph, self.alpha, x, self.bank.m())?;
        let responses = self.bank.apply(&cascade, x)?;
        Ok((cascade, responses))
    }

    /// Node-level scattering along `path`: filters with absolute values
    /// between stages, none after the last.
    pub fn scatter_nodes(&self, path: &[usize], x: &SignalMatrix) -> Result<SignalMatrix> {
        let j = self.bank.wavelet_count();
        if let Some(&bad) = path.iter().find(|&&idx| idx >= j) {
            return Err(Error::PathIndexOutOfRange { index: bad, j });
        }
        if path.is_empty() {
            return Ok(x.clone());
        }
        let mut current = x.clone();
        for (k, &jx) in path.iter().enumerate() {
            if k > 0 {
                current = current.abs();
            }
            let (_, responses) = self.responses(&current)?;
            current = responses.psi[jx].clone();
        }
        Ok(current)
    }
}

/// Statistical moments per channel: `S_q = sum_i |u_i|^q` for q = 1..q_max,
/// divided by the node count when `normalize` is set.
pub fn moments(u: &SignalMatrix, q_max: usize, normalize: bool) -> Vec<Vec<f64>> {
    let scale = if normalize && u.n() > 0 {
        1.0 / u.n() as f64
    } else {
        1.0
    };
    (0..u.channels())
        .map(|c| {
            let col = u.column(c);
            (1..=q_max)
                .map(|q| col.iter().map(|v| v.abs().powi(q as i32)).sum::<f64>() * scale)
                .collect()
        })
        .collect()
}

/// Which filter output a feature column came from.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum FeatureSource {
    Path { path: Vec<usize> },
    LowPass,
}

/// One feature column: channel, filter source, moment order.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct FeatureId {
    pub channel: usize,
    pub source: FeatureSource,
    pub q: usize,
}

/// One bank application retained for the backward pass: the stage's input,
/// its diffusion cascade, and the filter responses.
#[derive(Debug, Clone)]
pub struct PrefixStage {
    pub path: ScatteringPath,
    pub input: SignalMatrix,
    pub cascade: DiffusionCascade,
    pub responses: FilterResponses,
}

/// Everything the explicit backward pass needs without re-running diffusion.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub stages: Vec<PrefixStage>,
    stage_of_prefix: HashMap<ScatteringPath, usize>,
    /// Per enumerated path: (stage index, filter index) locating `U_p`;
    /// `None` for the empty path (the raw input).
    pub path_locations: Vec<(ScatteringPath, Option<(usize, usize)>)>,
    pub q_max: usize,
    pub normalize: bool,
    /// Effective selection coefficients; the one-hot equivalent when the
    /// forward pass used a fixed bank.
    pub selection: SelectionMatrix,
}

impl ForwardTrace {
    pub fn stage_of(&self, prefix: &[usize]) -> Option<usize> {
        self.stage_of_prefix.get(prefix).copied()
    }

    /// Node-level output for an enumerated path.
    pub fn path_output(&self, location: Option<(usize, usize)>) -> &SignalMatrix {
        match location {
            None => &self.stages[0].input,
            Some((stage, filter)) => &self.stages[stage].responses.psi[filter],
        }
    }
}

/// Graph-level scattering features in deterministic column order:
/// channels outermost, then paths (length, then lexicographic), the
/// low-pass block last inside each channel, moments innermost.
#[derive(Debug, Clone)]
pub struct ScatteringFeatures {
    pub values: Vec<f64>,
    pub index: Vec<FeatureId>,
    pub trace: Option<ForwardTrace>,
}

/// Runs the full transform. Pass `retain_trace` to keep the per-node
/// intermediates needed by the backward pass.
pub fn transform(
    g: &Graph,
    x: &SignalMatrix,
    bank: Bank<'_>,
    cfg: &ScatteringConfig,
    retain_trace: bool,
) -> Result<ScatteringFeatures> {
    cfg.validate()?;
    if bank.m() != cfg.m {
        return Err(Error::DimensionMismatch {
            context: "bank cascade depth vs config",
            expected: cfg.m,
            got: bank.m(),
        });
    }
    let j = bank.wavelet_count();
    let paths = enumerate_paths(j, cfg.order, cfg.path_rule)?;
    let applicator = BankApplicator {
        graph: g,
        bank,
        alpha: cfg.alpha,
    };

    let (cascade, responses) = applicator.responses(x)?;
    let mut stages = vec![PrefixStage {
        path: vec![],
        input: x.clone(),
        cascade,
        responses,
    }];
    let mut stage_of_prefix: HashMap<ScatteringPath, usize> = HashMap::new();
    stage_of_prefix.insert(vec![], 0);

    let mut path_locations: Vec<(ScatteringPath, Option<(usize, usize)>)> =
        Vec::with_capacity(paths.len());
    for p in &paths {
        if p.is_empty() {
            path_locations.push((p.clone(), None));
            continue;
        }
        let prefix = &p[..p.len() - 1];
        let stage_idx = match stage_of_prefix.get(prefix) {
            Some(&idx) => idx,
            None => {
                // First child of this prefix: scatter the prefix output
                // through the absolute value and cache its cascade.
                let (parent_path, parent_loc) = path_locations
                    .iter()
                    .find(|(q, _)| q == prefix)
                    .expect("paths are enumerated prefix-closed, shortest first");
                debug_assert_eq!(parent_path.as_slice(), prefix);
                let parent_out = match parent_loc {
                    None => &stages[0].input,
                    Some((s, f)) => &stages[*s].responses.psi[*f],
                };
                let input = parent_out.abs();
                let (cascade, responses) = applicator.responses(&input)?;
                stages.push(PrefixStage {
                    path: prefix.to_vec(),
                    input,
                    cascade,
                    responses,
                });
                let idx = stages.len() - 1;
                stage_of_prefix.insert(prefix.to_vec(), idx);
                idx
            }
        };
        let filter = *p.last().unwrap();
        path_locations.push((p.clone(), Some((stage_idx, filter))));
    }

    // Assemble features channel-major.
    let channels = x.channels();
    let per_path_moments: Vec<Vec<Vec<f64>>> = path_locations
        .iter()
        .map(|(_, loc)| {
            let u = match loc {
                None => &stages[0].input,
                Some((s, f)) => &stages[*s].responses.psi[*f],
            };
            moments(u, cfg.q_max, cfg.normalize_moments)
        })
        .collect();
    let phi_moments = moments(&stages[0].responses.phi, cfg.q_max, cfg.normalize_moments);

    let mut values = Vec::with_capacity((paths.len() + 1) * cfg.q_max * channels);
    let mut index = Vec::with_capacity(values.capacity());
    for c in 0..channels {
        for ((p, _), mom) in path_locations.iter().zip(&per_path_moments) {
            for (qi, &v) in mom[c].iter().enumerate() {
                values.push(v);
                index.push(FeatureId {
                    channel: c,
                    source: FeatureSource::Path { path: p.clone() },
                    q: qi + 1,
                });
            }
        }
        for (qi, &v) in phi_moments[c].iter().enumerate() {
            values.push(v);
            index.push(FeatureId {
                channel: c,
                source: FeatureSource::LowPass,
                q: qi + 1,
            });
        }
    }

    let trace = retain_trace.then(|| ForwardTrace {
        stages,
        stage_of_prefix,
        path_locations,
        q_max: cfg.q_max,
        normalize: cfg.normalize_moments,
        selection: match bank {
            Bank::Legs(sel) => sel.clone(),
            Bank::Fixed(scales) => SelectionMatrix::one_hot(scales),
        },
    });

    Ok(ScatteringFeatures {
        values,
        index,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filter_bank::ScaleSequence;
    use crate::graph::{build_graph, IsolatedPolicy};

    fn k2() -> Graph {
        build_graph(2, &[(0, 1, 1.0)], IsolatedPolicy::Reject).unwrap()
    }

    #[test]
    fn moments_examples() {
        let zero = SignalMatrix::zeros(3, 1);
        assert_eq!(moments(&zero, 3, false), vec![vec![0.0, 0.0, 0.0]]);

        let u = SignalMatrix::from_column(vec![0.5, -0.5]);
        assert_eq!(moments(&u, 2, false), vec![vec![1.0, 0.5]]);
        assert_eq!(moments(&u, 2, true), vec![vec![0.5, 0.25]]);
    }

    #[test]
    fn scatter_nodes_k2_examples() {
        let g = k2();
        let scales = ScaleSequence::new(vec![1], 1).unwrap();
        let applicator = BankApplicator {
            graph: &g,
            bank: Bank::Fixed(&scales),
            alpha: 0.5,
        };
        let x = SignalMatrix::from_column(vec![1.0, 0.0]);

        let empty = applicator.scatter_nodes(&[], &x).unwrap();
        assert_eq!(empty.data(), x.data());

        let one = applicator.scatter_nodes(&[0], &x).unwrap();
        assert!(one.max_abs_diff(&SignalMatrix::from_column(vec![0.5, -0.5])) <= 1e-15);

        // Psi_0 kills the constant |.| output on this regular graph.
        let two = applicator.scatter_nodes(&[0, 0], &x).unwrap();
        assert!(two.max_abs() <= 1e-15);

        assert_eq!(
            applicator.scatter_nodes(&[1], &x).unwrap_err(),
            Error::PathIndexOutOfRange { index: 1, j: 1 }
        );
    }

    #[test]
    fn transform_zero_signal_gives_zero_features() {
        let g = k2();
        let cfg = ScatteringConfig {
            j: 1,
            m: 2,
            q_max: 2,
            order: 2,
            ..Default::default()
        };
        let scales = ScaleSequence::new(vec![1], 2).unwrap();
        let x = SignalMatrix::zeros(2, 1);
        let f = transform(&g, &x, Bank::Fixed(&scales), &cfg, false).unwrap();
        assert!(f.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn transform_k2_composes_the_scalar_examples() {
        let g = k2();
        let cfg = ScatteringConfig {
            j: 1,
            m: 1,
            q_max: 2,
            order: 1,
            normalize_moments: false,
            ..Default::default()
        };
        let scales = ScaleSequence::new(vec![1], 1).unwrap();
        let x = SignalMatrix::from_column(vec![1.0, 0.0]);
        let f = transform(&g, &x, Bank::Fixed(&scales), &cfg, false).unwrap();
        // paths: [], [0]; then low-pass. q = 1, 2 each.
        // U_[] = (1,0): S1 = 1, S2 = 1.
        // U_[0] = (0.5,-0.5): S1 = 1, S2 = 0.5.
        // Phi x = (0.5,0.5): S1 = 1, S2 = 0.5.
        assert_eq!(f.values.len(), 6);
        let expect = [1.0, 1.0, 1.0, 0.5, 1.0, 0.5];
        for (a, b) in f.values.iter().zip(expect) {
            assert!((a - b).abs() <= 1e-15, "{:?}", f.values);
        }
    }

    #[test]
    fn feature_count_matches_contract() {
        let g = build_graph(
            4,
            &[(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0)],
            IsolatedPolicy::Reject,
        )
        .unwrap();
        let cfg = ScatteringConfig {
            j: 3,
            m: 4,
            q_max: 4,
            order: 2,
            ..Default::default()
        };
        let scales = ScaleSequence::new(vec![1, 2, 4], 4).unwrap();
        let x = SignalMatrix::from_columns(&[
            vec![1.0, 0.0, -1.0, 2.0],
            vec![0.5, 0.5, 0.5, 0.5],
        ])
        .unwrap();
        let f = transform(&g, &x, Bank::Fixed(&scales), &cfg, false).unwrap();
        let paths = cfg.paths().unwrap().len();
        assert_eq!(paths, 7);
        assert_eq!(f.values.len(), (paths + 1) * 4 * 2);
        assert_eq!(f.index.len(), f.values.len());
    }

    #[test]
    fn transform_is_bit_deterministic() {
        let g = build_graph(
            5,
            &[(0, 1, 1.0), (1, 2, 2.0), (2, 3, 1.5), (3, 4, 1.0), (0, 4, 1.0)],
            IsolatedPolicy::Reject,
        )
        .unwrap();
        let cfg = ScatteringConfig {
            j: 2,
            m: 4,
            ..Default::default()
        };
        let scales = ScaleSequence::new(vec![1, 3], 4).unwrap();
        let x = SignalMatrix::from_column(vec![0.3, -1.0, 2.0, 0.7, -0.2]);
        let a = transform(&g, &x, Bank::Fixed(&scales), &cfg, false).unwrap();
        let b = transform(&g, &x, Bank::Fixed(&scales), &cfg, false).unwrap();
        assert_eq!(a.values, b.values);
        assert_eq!(a.index, b.index);
    }

    #[test]
    fn trace_locates_every_path_output() {
        let g = k2();
        let cfg = ScatteringConfig {
            j: 2,
            m: 2,
            order: 2,
            ..Default::default()
        };
        let scales = ScaleSequence::new(vec![1, 2], 2).unwrap();
        let x = SignalMatrix::from_column(vec![1.0, -0.5]);
        let f = transform(&g, &x, Bank::Fixed(&scales), &cfg, true).unwrap();
        let trace = f.trace.unwrap();
        assert_eq!(trace.path_locations.len(), 4); // [], [0], [1], [0,1]
        assert!(trace.stage_of(&[]).is_some());
        assert!(trace.stage_of(&[0]).is_some());
        // (1,) has no children under the increasing rule.
        assert!(trace.stage_of(&[1]).is_none());
    }
}
