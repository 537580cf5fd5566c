use alloc::format;
use alloc::vec::Vec;

use super::mlp::{fit_mlp, Mlp, MlpConfig};
use crate::error::{Error, Result};
use crate::gbt::{fit_gbt, BoostedEnsemble, GbtConfig};
use crate::linalg::Matrix;
use crate::math;
use crate::model::{check_width, Model};
use crate::params::{ParamSet, Persist};

/// How the frozen booster's output becomes the head's input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FeatureMode {
    /// Per-class margins, C columns.
    #[default]
    Margins,
    /// One indicator per leaf of every tree.
    LeafOnehot,
    /// Margins followed by the raw features.
    MarginsPlusRaw,
}

impl FeatureMode {
    pub const ALL: [FeatureMode; 3] = [FeatureMode::Margins, FeatureMode::LeafOnehot, FeatureMode::MarginsPlusRaw];

    pub fn name(self) -> &'static str {
        match self {
            FeatureMode::Margins => "margins",
            FeatureMode::LeafOnehot => "leaf_onehot",
            FeatureMode::MarginsPlusRaw => "margins_plus_raw",
        }
    }

    pub fn from_name(name: &str) -> Option<FeatureMode> {
        FeatureMode::ALL.into_iter().find(|m| m.name() == name)
    }

    fn code(self) -> f64 {
        FeatureMode::ALL.iter().position(|&m| m == self).unwrap() as f64
    }
}

/// Boosted trees feeding a neural head.
#[derive(Debug, Clone, PartialEq)]
pub struct HybridXgDnn {
    pub booster: BoostedEnsemble,
    pub feature_mode: FeatureMode,
    pub head: Mlp,
    /// Column standardization applied to derived features before the head.
    /// Indicator features are passed through unchanged (location 0, scale 1).
    pub location: Vec<f64>,
    pub scale: Vec<f64>,
}

/// Features derived from the booster, before standardization.
pub fn derive_features(booster: &BoostedEnsemble, mode: FeatureMode, x: &Matrix) -> Result<Matrix> {
    match mode {
        FeatureMode::Margins => booster.margins(x),
        FeatureMode::LeafOnehot => booster.leaf_onehot(x),
        FeatureMode::MarginsPlusRaw => Ok(booster.margins(x)?.hconcat(x)),
    }
}

fn standardizer(f: &Matrix, mode: FeatureMode) -> (Vec<f64>, Vec<f64>) {
    let (n, d) = (f.rows() as f64, f.cols());
    if mode == FeatureMode::LeafOnehot {
        return (alloc::vec![0.0; d], alloc::vec![1.0; d]);
    }
    (0..d)
        .map(|j| {
            let col = f.column(j);
            let mean = col.iter().sum::<f64>() / n;
            let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            let sd = math::sqrt(var);
            (mean, if sd > 1e-12 { sd } else { 1.0 })
        })
        .unzip()
}

fn standardize(mut f: Matrix, location: &[f64], scale: &[f64]) -> Matrix {
    for i in 0..f.rows() {
        for ((v, l), s) in f.row_mut(i).iter_mut().zip(location).zip(scale) {
            *v = (*v - l) / s;
        }
    }
    f
}

pub fn fit_hybrid(
    x: &Matrix,
    y: &[usize],
    n_classes: usize,
    gbt_cfg: &GbtConfig,
    mlp_cfg: &MlpConfig,
    feature_mode: FeatureMode,
) -> Result<HybridXgDnn> {
    let booster = fit_gbt(x, y, n_classes, gbt_cfg)?;
    let derived = derive_features(&booster, feature_mode, x)?;
    let (location, scale) = standardizer(&derived, feature_mode);
    let head = fit_mlp(&standardize(derived, &location, &scale), y, n_classes, mlp_cfg)?;
    Ok(HybridXgDnn { booster, feature_mode, head, location, scale })
}

impl HybridXgDnn {
    /// The head's input for these rows.
    pub fn head_input(&self, x: &Matrix) -> Result<Matrix> {
        Ok(standardize(derive_features(&self.booster, self.feature_mode, x)?, &self.location, &self.scale))
    }
}

pub fn predict_hybrid(h: &HybridXgDnn, x: &Matrix) -> Result<Matrix> {
    h.predict_proba(x)
}

impl Model for HybridXgDnn {
    fn n_classes(&self) -> usize {
        self.booster.n_classes
    }

    fn n_features(&self) -> usize {
        self.booster.n_features
    }

    fn predict_proba(&self, x: &Matrix) -> Result<Matrix> {
        check_width(x, self.n_features())?;
        self.head.predict_proba(&self.head_input(x)?)
    }
}

impl Persist for HybridXgDnn {
    const KIND: &'static str = "xgdnn";

    fn to_params(&self) -> ParamSet {
        let mut p = ParamSet::new();
        p.push_scalar("feature_mode", self.feature_mode.code());
        p.push_vec("location", &self.location);
        p.push_vec("scale", &self.scale);
        p.extend_prefixed("booster", self.booster.to_params());
        p.extend_prefixed("head", self.head.to_params());
        p
    }

    fn from_params(p: &ParamSet) -> Result<Self> {
        let code = p.count("feature_mode")?;
        let feature_mode =
            *FeatureMode::ALL.get(code).ok_or_else(|| Error::data(format!("unknown feature mode code {code}")))?;
        let h = HybridXgDnn {
            booster: BoostedEnsemble::from_params(&p.sub("booster"))?,
            feature_mode,
            head: Mlp::from_params(&p.sub("head"))?,
            location: p.vector("location")?,
            scale: p.vector("scale")?,
        };
        let width = match feature_mode {
            FeatureMode::Margins => h.booster.n_classes,
            FeatureMode::LeafOnehot => h.booster.total_leaves(),
            FeatureMode::MarginsPlusRaw => h.booster.n_classes + h.booster.n_features,
        };
        if h.head.n_features() != width || h.location.len() != width || h.scale.len() != width {
            return Err(Error::Dimension { expected: width, got: h.head.n_features() });
        }
        Ok(h)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> (Matrix, Vec<usize>) {
        let x = Matrix::from_rows(&[[0.0, 1.0], [1.0, 0.0], [2.0, 1.0], [3.0, 0.0], [4.0, 1.0], [5.0, 0.0]]);
        (x, alloc::vec![0, 0, 1, 1, 2, 2])
    }

    fn cfgs() -> (GbtConfig, MlpConfig) {
        (
            GbtConfig { rounds: 3, max_depth: 2, min_child_weight: 0.0, ..GbtConfig::default() },
            MlpConfig { hidden: alloc::vec![4], epochs: 5, batch_size: 4, ..MlpConfig::default() },
        )
    }

    #[test]
    fn head_width_follows_mode() {
        let (x, y) = small();
        let (g, m) = cfgs();
        for mode in FeatureMode::ALL {
            let h = fit_hybrid(&x, &y, 3, &g, &m, mode).unwrap();
            let expected = match mode {
                FeatureMode::Margins => 3,
                FeatureMode::LeafOnehot => h.booster.total_leaves(),
                FeatureMode::MarginsPlusRaw => 5,
            };
            assert_eq!(h.head.n_features(), expected);
            assert_eq!(HybridXgDnn::from_params(&h.to_params()).unwrap(), h);
        }
    }

    #[test]
    fn composition_matches_two_steps() {
        let (x, y) = small();
        let (g, m) = cfgs();
        let h = fit_hybrid(&x, &y, 3, &g, &m, FeatureMode::Margins).unwrap();
        let manual = h.head.predict_proba(&h.head_input(&x).unwrap()).unwrap();
        assert_eq!(predict_hybrid(&h, &x).unwrap(), manual);
    }

    #[test]
    fn mode_names_round_trip() {
        for m in FeatureMode::ALL {
            assert_eq!(FeatureMode::from_name(m.name()), Some(m));
        }
        assert_eq!(FeatureMode::from_name("bogus"), None);
    }
}
