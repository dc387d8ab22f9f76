//! Scattering path enumeration.

use crate::error::{Error, Result};

/// A cascade of wavelet indices; the empty path is the raw signal.
pub type ScatteringPath = Vec<usize>;

/// Which length-2+ index combinations to enumerate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathRule {
    /// Strictly increasing indices (j1 < j2 < ...).
    Increasing,
    /// Every ordered tuple.
    AllOrdered,
}

/// Enumerates all paths up to `order` filters, sorted by length then
/// lexicographically. Always includes the empty path and every length-1
/// path; the rule only constrains longer paths.
pub fn enumerate_paths(j: usize, order: usize, rule: PathRule) -> Result<Vec<ScatteringPath>> {
    if !(1..=3).contains(&order) {
        return Err(Error::UnsupportedOrder { order });
    }
    let mut paths: Vec<ScatteringPath> = vec![vec![]];
    let mut level: Vec<ScatteringPath> = (0..j).map(|x| vec![x]).collect();
    paths.extend(level.iter().cloned());
    for _ in 2..=order {
        let mut next = Vec::new();
        for p in &level {
            let last = *p.last().unwrap();
            let start = match rule {
                PathRule::Increasing => last + 1,
                PathRule::AllOrdered => 0,
            };
            for jx in start..j {
                let mut q = p.clone();
                q.push(jx);
                next.push(q);
            }
        }
        paths.extend(next.iter().cloned());
        level = next;
    }
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_one_paths() {
        let p = enumerate_paths(2, 1, PathRule::Increasing).unwrap();
        assert_eq!(p, vec![vec![], vec![0], vec![1]]);
    }

    #[test]
    fn increasing_pairs() {
        let p = enumerate_paths(3, 2, PathRule::Increasing).unwrap();
        assert_eq!(p.len(), 7);
        assert_eq!(
            &p[4..],
            &[vec![0, 1], vec![0, 2], vec![1, 2]]
        );
    }

    #[test]
    fn all_ordered_pairs() {
        let p = enumerate_paths(3, 2, PathRule::AllOrdered).unwrap();
        assert_eq!(p.len(), 13);
    }

    #[test]
    fn order_three_counts() {
        let p = enumerate_paths(3, 3, PathRule::Increasing).unwrap();
        // 1 + 3 + 3 + 1
        assert_eq!(p.len(), 8);
        let p = enumerate_paths(2, 3, PathRule::AllOrdered).unwrap();
        // 1 + 2 + 4 + 8
        assert_eq!(p.len(), 15);
    }

    #[test]
    fn unsupported_order_rejected() {
        assert_eq!(
            enumerate_paths(2, 4, PathRule::Increasing).unwrap_err(),
            Error::UnsupportedOrder { order: 4 }
        );
    }
}
