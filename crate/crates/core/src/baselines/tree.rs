use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::math;
use crate::model::{check_width, Model};
use crate::params::{ParamSet, Persist};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Criterion {
    Gini,
    Entropy,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeConfig {
    pub max_depth: usize,
    pub min_leaf: usize,
    pub criterion: Criterion,
}

impl Default for TreeConfig {
    fn default() -> Self {
        TreeConfig { max_depth: 10, min_leaf: 1, criterion: Criterion::Gini }
    }
}

/// Arena node. `x[feature] <= threshold` goes left.
#[derive(Debug, Clone, PartialEq)]
pub enum TreeNode {
    Split { feature: usize, threshold: f64, left: usize, right: usize },
    Leaf { counts: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTree {
    pub nodes: Vec<TreeNode>,
    pub n_classes: usize,
    pub n_features: usize,
}

fn impurity(counts: &[f64], total: f64, criterion: Criterion) -> f64 {
    if total <= 0.0 {
        return 0.0;
    }
    match criterion {
        Criterion::Gini => 1.0 - counts.iter().map(|&c| (c / total) * (c / total)).sum::<f64>(),
        Criterion::Entropy => -counts
            .iter()
            .filter(|&&c| c > 0.0)
            .map(|&c| {
                let p = c / total;
                p * math::ln(p)
            })
            .sum::<f64>(),
    }
}

/// Feature subset used at one node: either all features or `mtry` drawn
/// at random, always visited in ascending index order.
pub(crate) enum FeatureSampler<'a, R: Rng> {
    All,
    Random { mtry: usize, rng: &'a mut R },
}

impl<R: Rng> FeatureSampler<'_, R> {
    fn draw(&mut self, d: usize) -> Vec<usize> {
        match self {
            FeatureSampler::All => (0..d).collect(),
            FeatureSampler::Random { mtry, rng } => {
                if *mtry >= d {
                    return (0..d).collect();
                }
                let mut all: Vec<usize> = (0..d).collect();
                for i in 0..*mtry {
                    let j = rng.gen_range(i..d);
                    all.swap(i, j);
                }
                let mut picked = all[..*mtry].to_vec();
                picked.sort_unstable();
                picked
            }
        }
    }
}

struct Grower<'a, 'r, R: Rng> {
    x: &'a Matrix,
    y: &'a [usize],
    n_classes: usize,
    cfg: &'a TreeConfig,
    sampler: FeatureSampler<'r, R>,
    nodes: Vec<TreeNode>,
}

impl<R: Rng> Grower<'_, '_, R> {
    fn counts(&self, idx: &[usize]) -> Vec<f64> {
        let mut c = vec![0.0; self.n_classes];
        for &i in idx {
            c[self.y[i]] += 1.0;
        }
        c
    }

    fn grow(&mut self, idx: &mut [usize], depth: usize) -> usize {
        let counts = self.counts(idx);
        let total = idx.len() as f64;
        let id = self.nodes.len();
        self.nodes.push(TreeNode::Leaf { counts: counts.clone() });
        let pure = counts.iter().filter(|&&c| c > 0.0).count() <= 1;
        if pure || depth >= self.cfg.max_depth || idx.len() < 2 * self.cfg.min_leaf.max(1) {
            return id;
        }
        let parent = impurity(&counts, total, self.cfg.criterion);

        // (decrease, feature, threshold)
        let mut best: Option<(f64, usize, f64)> = None;
        let features = self.sampler.draw(self.x.cols());
        let mut left = vec![0.0; self.n_classes];
        let mut right = vec![0.0; self.n_classes];
        for f in features {
            idx.sort_unstable_by(|&a, &b| self.x[(a, f)].total_cmp(&self.x[(b, f)]).then(a.cmp(&b)));
            left.iter_mut().for_each(|c| *c = 0.0);
            right.copy_from_slice(&counts);
            for pos in 0..idx.len() - 1 {
                let l = self.y[idx[pos]];
                left[l] += 1.0;
                right[l] -= 1.0;
                let (a, b) = (self.x[(idx[pos], f)], self.x[(idx[pos + 1], f)]);
                if a == b {
                    continue;
                }
                let n_left = pos + 1;
                if n_left < self.cfg.min_leaf || idx.len() - n_left < self.cfg.min_leaf {
                    continue;
                }
                let (nl, nr) = (n_left as f64, (idx.len() - n_left) as f64);
                let decrease = parent
                    - (nl / total) * impurity(&left, nl, self.cfg.criterion)
                    - (nr / total) * impurity(&right, nr, self.cfg.criterion);
                if best.is_none_or(|(d, _, _)| decrease > d) {
                    best = Some((decrease, f, midpoint(a, b)));
                }
            }
        }
        let Some((decrease, feature, threshold)) = best else { return id };
        if !(decrease > 1e-12) {
            return id;
        }
        idx.sort_unstable_by(|&a, &b| {
            (self.x[(a, feature)] > threshold).cmp(&(self.x[(b, feature)] > threshold)).then(a.cmp(&b))
        });
        let split_at = idx.iter().position(|&i| self.x[(i, feature)] > threshold).unwrap_or(idx.len());
        let (li, ri) = idx.split_at_mut(split_at);
        let l = self.grow(li, depth + 1);
        let r = self.grow(ri, depth + 1);
        self.nodes[id] = TreeNode::Split { feature, threshold, left: l, right: r };
        id
    }
}

/// Midpoint of two adjacent distinct values that still separates them.
pub(crate) fn midpoint(lo: f64, hi: f64) -> f64 {
    let m = 0.5 * (lo + hi);
    if m < hi {
        m
    } else {
        lo
    }
}

pub(crate) fn grow_tree<R: Rng>(
    x: &Matrix,
    y: &[usize],
    rows: &mut [usize],
    n_classes: usize,
    cfg: &TreeConfig,
    sampler: FeatureSampler<'_, R>,
) -> DecisionTree {
    let mut g = Grower { x, y, n_classes, cfg, sampler, nodes: Vec::new() };
    g.grow(rows, 0);
    DecisionTree { nodes: g.nodes, n_classes, n_features: x.cols() }
}

pub(crate) fn check_labels(x: &Matrix, y: &[usize], n_classes: usize) -> Result<()> {
    if y.len() != x.rows() {
        return Err(Error::Dimension { expected: x.rows(), got: y.len() });
    }
    if x.rows() == 0 {
        return Err(Error::data("no training rows"));
    }
    if let Some(&l) = y.iter().find(|&&l| l >= n_classes) {
        return Err(Error::data(format!("label {l} out of range")));
    }
    Ok(())
}

/// Greedy CART over midpoints of sorted distinct values. Ties in impurity
/// decrease go to the smallest feature index, then the smallest threshold.
pub fn fit_tree(x: &Matrix, y: &[usize], n_classes: usize, cfg: &TreeConfig) -> Result<DecisionTree> {
    check_labels(x, y, n_classes)?;
    let mut rows: Vec<usize> = (0..x.rows()).collect();
    Ok(grow_tree::<rand_chacha::ChaCha8Rng>(x, y, &mut rows, n_classes, cfg, FeatureSampler::All))
}

impl DecisionTree {
    pub fn leaf_for(&self, row: &[f64]) -> usize {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                TreeNode::Split { feature, threshold, left, right } => {
                    at = if row[*feature] <= *threshold { *left } else { *right };
                }
                TreeNode::Leaf { .. } => return at,
            }
        }
    }

    /// Laplace-smoothed class frequencies at the leaf reached by `row`.
    pub fn leaf_distribution(&self, row: &[f64], out: &mut [f64]) {
        let TreeNode::Leaf { counts } = &self.nodes[self.leaf_for(row)] else { unreachable!() };
        let n: f64 = counts.iter().sum();
        let denom = n + self.n_classes as f64;
        for (o, c) in out.iter_mut().zip(counts) {
            *o = (c + 1.0) / denom;
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[TreeNode], at: usize) -> usize {
            match &nodes[at] {
                TreeNode::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
                TreeNode::Leaf { .. } => 0,
            }
        }
        walk(&self.nodes, 0)
    }
}

impl Model for DecisionTree {
    fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn n_features(&self) -> usize {
        self.n_features
    }

    fn predict_proba(&self, x: &Matrix) -> Result<Matrix> {
        check_width(x, self.n_features)?;
        let mut out = Matrix::zeros(x.rows(), self.n_classes);
        for (i, row) in x.iter_rows().enumerate() {
            self.leaf_distribution(row, out.row_mut(i));
        }
        Ok(out)
    }
}

impl Persist for DecisionTree {
    const KIND: &'static str = "tree";

    fn to_params(&self) -> ParamSet {
        let n = self.nodes.len();
        let mut feature = Vec::with_capacity(n);
        let mut threshold = Vec::with_capacity(n);
        let mut children = Vec::with_capacity(2 * n);
        let mut counts = Vec::with_capacity(n * self.n_classes);
        for node in &self.nodes {
            match node {
                TreeNode::Split { feature: f, threshold: t, left, right } => {
                    feature.push(*f as f64);
                    threshold.push(*t);
                    children.extend([*left as f64, *right as f64]);
                    counts.extend(core::iter::repeat_n(0.0, self.n_classes));
                }
                TreeNode::Leaf { counts: c } => {
                    feature.push(-1.0);
                    threshold.push(0.0);
                    children.extend([0.0, 0.0]);
                    counts.extend_from_slice(c);
                }
            }
        }
        let mut p = ParamSet::new();
        p.push_scalar("n_features", self.n_features as f64);
        p.push_vec("feature", &feature);
        p.push_vec("threshold", &threshold);
        p.push("children", vec![n, 2], children);
        p.push("counts", vec![n, self.n_classes], counts);
        p
    }

    fn from_params(p: &ParamSet) -> Result<Self> {
        let feature = p.vector("feature")?;
        let threshold = p.vector("threshold")?;
        let children = p.matrix("children")?;
        let counts = p.matrix("counts")?;
        let n = feature.len();
        if threshold.len() != n || children.rows() != n || counts.rows() != n {
            return Err(Error::data("inconsistent tree arrays"));
        }
        let mut nodes = Vec::with_capacity(n);
        for i in 0..n {
            if feature[i] < 0.0 {
                nodes.push(TreeNode::Leaf { counts: counts.row(i).to_vec() });
            } else {
                let (left, right) = (children[(i, 0)] as usize, children[(i, 1)] as usize);
                if left >= n || right >= n || left <= i || right <= i {
                    return Err(Error::data("tree child index out of range"));
                }
                nodes.push(TreeNode::Split { feature: feature[i] as usize, threshold: threshold[i], left, right });
            }
        }
        Ok(DecisionTree { nodes, n_classes: counts.cols(), n_features: p.count("n_features")? })
    }
}
