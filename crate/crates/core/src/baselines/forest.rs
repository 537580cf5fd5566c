use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::tree::{check_labels, grow_tree, DecisionTree, FeatureSampler, TreeConfig};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::math;
use crate::model::{check_width, Model};
use crate::params::{ParamSet, Persist};

#[derive(Debug, Clone, PartialEq)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub tree: TreeConfig,
    /// Features tried per split; `None` means `round(sqrt(d))`.
    pub mtry: Option<usize>,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            n_trees: 100,
            tree: TreeConfig { max_depth: 12, ..TreeConfig::default() },
            mtry: None,
            bootstrap: true,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RandomForest {
    pub trees: Vec<DecisionTree>,
    pub n_classes: usize,
    pub n_features: usize,
}

pub fn fit_forest(x: &Matrix, y: &[usize], n_classes: usize, cfg: &ForestConfig) -> Result<RandomForest> {
    check_labels(x, y, n_classes)?;
    if cfg.n_trees == 0 {
        return Err(Error::param("n_trees must be at least 1"));
    }
    let d = x.cols();
    let mtry = cfg.mtry.unwrap_or_else(|| (math::round(math::sqrt(d as f64)) as usize).max(1));
    if mtry == 0 {
        return Err(Error::param("mtry must be at least 1"));
    }
    // Per-tree seeds are drawn up front so each tree is independent of the
    // order in which trees are grown.
    let mut master = ChaCha8Rng::seed_from_u64(cfg.seed);
    let seeds: Vec<u64> = (0..cfg.n_trees).map(|_| master.gen()).collect();
    let n = x.rows();
    let trees = seeds
        .into_iter()
        .map(|s| {
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            let mut rows: Vec<usize> =
                if cfg.bootstrap { (0..n).map(|_| rng.gen_range(0..n)).collect() } else { (0..n).collect() };
            grow_tree(x, y, &mut rows, n_classes, &cfg.tree, FeatureSampler::Random { mtry, rng: &mut rng })
        })
        .collect();
    Ok(RandomForest { trees, n_classes, n_features: d })
}

impl Model for RandomForest {
    fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn n_features(&self) -> usize {
        self.n_features
    }

    fn predict_proba(&self, x: &Matrix) -> Result<Matrix> {
        check_width(x, self.n_features)?;
        let mut out = Matrix::zeros(x.rows(), self.n_classes);
        let mut buf = vec![0.0; self.n_classes];
        let k = self.trees.len() as f64;
        for (i, row) in x.iter_rows().enumerate() {
            let o = out.row_mut(i);
            for t in &self.trees {
                t.leaf_distribution(row, &mut buf);
                for (a, b) in o.iter_mut().zip(&buf) {
                    *a += b;
                }
            }
            o.iter_mut().for_each(|v| *v /= k);
        }
        Ok(out)
    }
}

impl Persist for RandomForest {
    const KIND: &'static str = "forest";

    fn to_params(&self) -> ParamSet {
        let mut p = ParamSet::new();
        p.push_scalar("n_trees", self.trees.len() as f64);
        p.push_scalar("n_classes", self.n_classes as f64);
        p.push_scalar("n_features", self.n_features as f64);
        for (i, t) in self.trees.iter().enumerate() {
            p.extend_prefixed(&format!("tree{i}"), t.to_params());
        }
        p
    }

    fn from_params(p: &ParamSet) -> Result<Self> {
        let n = p.count("n_trees")?;
        let trees = (0..n).map(|i| DecisionTree::from_params(&p.sub(&format!("tree{i}")))).collect::<Result<Vec<_>>>()?;
        Ok(RandomForest { trees, n_classes: p.count("n_classes")?, n_features: p.count("n_features")? })
    }
}
