//! SMOTE oversampling.
//!
//! Every class below the target count receives synthetic rows placed on
//! the segment between a randomly chosen member and one of its k nearest
//! same-class neighbors (Euclidean). Original rows come first in the
//! output, in their original order, followed by the synthetic rows grouped
//! by ascending class.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result, Warning};
use crate::frame::{EncodedTarget, Frame};
use crate::linalg::Matrix;

#[derive(Debug, Clone, PartialEq)]
pub struct SmoteConfig {
    pub k_neighbors: usize,
    pub seed: u64,
    /// Rows per class after balancing; defaults to the largest class.
    pub target_count: Option<usize>,
}

impl Default for SmoteConfig {
    fn default() -> Self {
        SmoteConfig { k_neighbors: 5, seed: 0, target_count: None }
    }
}

/// Which original rows a synthetic row was interpolated between.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticOrigin {
    pub base: usize,
    pub neighbor: usize,
    pub gap: f64,
}

#[derive(Debug, Clone)]
pub struct SmoteOutput {
    pub x: Matrix,
    pub labels: Vec<usize>,
    /// One entry per synthetic row, aligned with rows `n_original..`.
    pub origins: Vec<SyntheticOrigin>,
    pub warnings: Vec<Warning>,
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Indices (into `members`) of the k nearest other members of `members[at]`.
/// Ties break toward the smaller index.
fn nearest(x: &Matrix, members: &[usize], at: usize, k: usize) -> Vec<usize> {
    let anchor = x.row(members[at]);
    let mut d: Vec<(f64, usize)> = members
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != at)
        .map(|(j, &row)| (squared_distance(anchor, x.row(row)), j))
        .collect();
    d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    d.truncate(k);
    d.into_iter().map(|(_, j)| j).collect()
}

pub fn smote_matrix(x: &Matrix, labels: &[usize], n_classes: usize, cfg: &SmoteConfig) -> Result<SmoteOutput> {
    if cfg.k_neighbors == 0 {
        return Err(Error::param("k_neighbors must be at least 1"));
    }
    if labels.len() != x.rows() {
        return Err(Error::Dimension { expected: x.rows(), got: labels.len() });
    }
    if x.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::data("SMOTE needs finite numeric features"));
    }
    let mut members: Vec<Vec<usize>> = alloc::vec![Vec::new(); n_classes];
    for (i, &l) in labels.iter().enumerate() {
        if l >= n_classes {
            return Err(Error::data(format!("label {l} out of range")));
        }
        members[l].push(i);
    }
    let largest = members.iter().map(Vec::len).max().unwrap_or(0);
    let target = cfg.target_count.unwrap_or(largest);

    let mut warnings = Vec::new();
    for (c, m) in members.iter().enumerate() {
        if m.len() < target {
            if m.is_empty() {
                warnings.push(Warning::new("smote_class_absent", format!("class {c} has no rows and cannot be oversampled")));
            } else if m.len() < 2 {
                return Err(Error::data(format!("class {c} has a single row; SMOTE needs at least 2")));
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut out = x.clone();
    let mut out_labels = labels.to_vec();
    let mut origins = Vec::new();
    let mut row = alloc::vec![0.0; x.cols()];
    for (c, m) in members.iter().enumerate() {
        if m.len() >= target || m.is_empty() {
            continue;
        }
        let k = if cfg.k_neighbors >= m.len() {
            warnings.push(Warning::new(
                "smote_k_clamped",
                format!("class {c}: k_neighbors {} clamped to {}", cfg.k_neighbors, m.len() - 1),
            ));
            m.len() - 1
        } else {
            cfg.k_neighbors
        };
        let mut cache: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for _ in 0..(target - m.len()) {
            let at = rng.gen_range(0..m.len());
            let nn = cache.entry(at).or_insert_with(|| nearest(x, m, at, k));
            let pick = nn[rng.gen_range(0..nn.len())];
            let gap: f64 = rng.gen();
            let (a, b) = (x.row(m[at]), x.row(m[pick]));
            for (r, (&xa, &xb)) in row.iter_mut().zip(a.iter().zip(b)) {
                *r = xa + gap * (xb - xa);
            }
            out.push_row(&row);
            out_labels.push(c);
            origins.push(SyntheticOrigin { base: m[at], neighbor: m[pick], gap });
        }
    }
    Ok(SmoteOutput { x: out, labels: out_labels, origins, warnings })
}

/// Balances a numeric labeled frame. Returns the frame and any warnings.
pub fn smote(train: &Frame, cfg: &SmoteConfig) -> Result<(Frame, Vec<Warning>)> {
    let t = train.require_target()?;
    let x = train.feature_matrix()?;
    let out = smote_matrix(&x, t.labels(), t.n_classes(), cfg)?;
    let target = EncodedTarget::new(out.labels, t.class_names().to_vec())?;
    let f = Frame::from_matrix(train.names().to_vec(), &out.x)?.with_target(target)?;
    Ok((f, out.warnings))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn balanced_input_is_unchanged() {
        let x = Matrix::from_rows(&[[0.0], [1.0], [5.0], [6.0]]);
        let out = smote_matrix(&x, &[0, 0, 1, 1], 2, &SmoteConfig::default()).unwrap();
        assert_eq!(out.x, x);
        assert_eq!(out.labels, [0, 0, 1, 1]);
        assert!(out.origins.is_empty());
    }

    #[test]
    fn segment_between_two_points() {
        // minority {(0,0),(1,0)}, k = 1, three synthetics
        let x = Matrix::from_rows(&[[0.0, 0.0], [1.0, 0.0], [9.0, 9.0], [9.0, 8.0], [8.0, 9.0], [8.0, 8.0], [7.0, 7.0]]);
        let labels = [0, 0, 1, 1, 1, 1, 1];
        let cfg = SmoteConfig { k_neighbors: 1, seed: 3, target_count: None };
        let out = smote_matrix(&x, &labels, 2, &cfg).unwrap();
        assert_eq!(out.x.rows(), 10);
        for i in 7..10 {
            let r = out.x.row(i);
            assert_eq!(r[1], 0.0);
            assert!((0.0..=1.0).contains(&r[0]));
            assert_eq!(out.labels[i], 0);
        }
        assert_eq!(&out.x.as_slice()[..14], x.as_slice());
    }

    #[test]
    fn single_row_class_is_an_error() {
        let x = Matrix::from_rows(&[[0.0], [1.0], [2.0]]);
        assert!(smote_matrix(&x, &[0, 1, 1], 2, &SmoteConfig::default()).is_err());
        let cfg = SmoteConfig { k_neighbors: 0, ..SmoteConfig::default() };
        assert!(smote_matrix(&x, &[0, 1, 1], 2, &cfg).is_err());
    }

    #[test]
    fn k_is_clamped_with_warning() {
        let x = Matrix::from_rows(&[[0.0], [1.0], [5.0], [6.0], [7.0], [8.0]]);
        let out = smote_matrix(&x, &[0, 0, 1, 1, 1, 1], 2, &SmoteConfig::default()).unwrap();
        assert_eq!(out.warnings[0].code, "smote_k_clamped");
        assert_eq!(out.labels.iter().filter(|&&l| l == 0).count(), 4);
    }

    #[test]
    fn deterministic_per_seed() {
        let x = Matrix::from_rows(&[[0.0, 1.0], [1.0, 3.0], [2.0, 2.0], [5.0, 6.0], [6.0, 6.0], [7.0, 5.0], [8.0, 8.0], [9.0, 9.0]]);
        let labels = [0, 0, 0, 1, 1, 1, 1, 1];
        let cfg = SmoteConfig { k_neighbors: 2, seed: 11, target_count: Some(9) };
        let a = smote_matrix(&x, &labels, 2, &cfg).unwrap();
        let b = smote_matrix(&x, &labels, 2, &cfg).unwrap();
        assert_eq!(a.x, b.x);
        assert_eq!(a.labels.iter().filter(|&&l| l == 1).count(), 9);
        assert_eq!(a.labels.iter().filter(|&&l| l == 0).count(), 9);
    }
}
