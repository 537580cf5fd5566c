//! Second-order gradient-boosted regression trees with a softmax
//! cross-entropy objective, one tree per class per round.
//!
//! Split search is exact greedy: every feature is presorted once, and each
//! tree is grown level by level by sweeping those sorted orders and
//! accumulating gradient/hessian sums for every open node at once. A split
//! is accepted when
//!
//! ```text
//! gain = ½ [G_L²/(H_L+λ) + G_R²/(H_R+λ) − (G_L+G_R)²/(H_L+H_R+λ)] − γ > 0
//! ```
//!
//! and both children carry at least `min_child_weight` hessian mass. Leaves
//! hold the Newton step `−G/(H+λ)`; predictions add it scaled by the
//! learning rate.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::baselines::tree::midpoint;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::math;
use crate::model::{check_width, Model};
use crate::params::{ParamSet, Persist};

#[derive(Debug, Clone, PartialEq)]
pub struct GbtConfig {
    pub rounds: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub lambda: f64,
    pub gamma: f64,
    pub min_child_weight: f64,
    /// Kept for configuration symmetry; exact greedy training draws no
    /// random numbers.
    pub seed: u64,
}

impl Default for GbtConfig {
    fn default() -> Self {
        GbtConfig { rounds: 100, learning_rate: 0.3, max_depth: 6, lambda: 1.0, gamma: 0.0, min_child_weight: 1.0, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RegNode {
    Split { feature: usize, threshold: f64, left: usize, right: usize, gain: f64, grad: f64, hess: f64 },
    Leaf { weight: f64, grad: f64, hess: f64 },
}

impl RegNode {
    pub fn sums(&self) -> (f64, f64) {
        match *self {
            RegNode::Split { grad, hess, .. } | RegNode::Leaf { grad, hess, .. } => (grad, hess),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionTree {
    pub nodes: Vec<RegNode>,
    /// Depth-first leaf ordinal for each node (meaningless for splits).
    leaf_ordinal: Vec<usize>,
    n_leaves: usize,
}

impl RegressionTree {
    fn new(nodes: Vec<RegNode>) -> Self {
        let mut leaf_ordinal = vec![0; nodes.len()];
        let mut next = 0;
        let mut stack = vec![0usize];
        while let Some(at) = stack.pop() {
            match nodes[at] {
                RegNode::Split { left, right, .. } => {
                    stack.push(right);
                    stack.push(left);
                }
                RegNode::Leaf { .. } => {
                    leaf_ordinal[at] = next;
                    next += 1;
                }
            }
        }
        RegressionTree { nodes, leaf_ordinal, n_leaves: next }
    }

    pub fn leaf_node(&self, row: &[f64]) -> usize {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                RegNode::Split { feature, threshold, left, right, .. } => {
                    at = if row[feature] <= threshold { left } else { right };
                }
                RegNode::Leaf { .. } => return at,
            }
        }
    }

    pub fn leaf_index(&self, row: &[f64]) -> usize {
        self.leaf_ordinal[self.leaf_node(row)]
    }

    pub fn value(&self, row: &[f64]) -> f64 {
        match self.nodes[self.leaf_node(row)] {
            RegNode::Leaf { weight, .. } => weight,
            RegNode::Split { .. } => unreachable!(),
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.n_leaves
    }

    pub fn is_bare_root(&self) -> bool {
        self.nodes.len() == 1
    }
}

/// Fitted ensemble. Trees are stored round-major: tree `r * C + c` is the
/// class-`c` tree of round `r`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoostedEnsemble {
    pub n_classes: usize,
    pub n_features: usize,
    pub learning_rate: f64,
    pub lambda: f64,
    pub gamma: f64,
    pub base_score: Vec<f64>,
    pub trees: Vec<RegressionTree>,
    /// Mean training cross-entropy before the first round and after each round.
    pub train_loss: Vec<f64>,
}

/// Gain of splitting a node with the given child sums.
pub fn split_gain(gl: f64, hl: f64, gr: f64, hr: f64, lambda: f64, gamma: f64) -> f64 {
    0.5 * (gl * gl / (hl + lambda) + gr * gr / (hr + lambda) - (gl + gr) * (gl + gr) / (hl + hr + lambda)) - gamma
}

pub fn leaf_weight(g: f64, h: f64, lambda: f64) -> f64 {
    -g / (h + lambda)
}

#[derive(Clone, Copy)]
struct Scan {
    gl: f64,
    hl: f64,
    last: f64,
    seen: bool,
    best_gain: f64,
    best_feature: usize,
    best_threshold: f64,
}

const OPEN: u32 = u32::MAX;

struct TreeBuilder<'a> {
    x: &'a Matrix,
    order: &'a [Vec<u32>],
    cfg: &'a GbtConfig,
}

impl TreeBuilder<'_> {
    /// Grows one tree and leaves `node_of[i]` pointing at the leaf of row i.
    fn build(&self, g: &[f64], h: &[f64], node_of: &mut [u32]) -> RegressionTree {
        let n = g.len();
        node_of.iter_mut().for_each(|v| *v = 0);
        let (g0, h0) = (g.iter().sum::<f64>(), h.iter().sum::<f64>());
        let mut stats: Vec<(f64, f64)> = vec![(g0, h0)];
        let mut splits: Vec<Option<(usize, f64, usize, usize, f64)>> = vec![None];
        let mut frontier: Vec<usize> = vec![0];
        // slot of each node in the current frontier, OPEN if closed
        let mut slot: Vec<u32> = vec![0];

        for _depth in 0..self.cfg.max_depth {
            if frontier.is_empty() {
                break;
            }
            let mut scans: Vec<Scan> = frontier
                .iter()
                .map(|_| Scan {
                    gl: 0.0,
                    hl: 0.0,
                    last: 0.0,
                    seen: false,
                    best_gain: 0.0,
                    best_feature: usize::MAX,
                    best_threshold: 0.0,
                })
                .collect();
            for (f, ord) in self.order.iter().enumerate() {
                for s in scans.iter_mut() {
                    s.gl = 0.0;
                    s.hl = 0.0;
                    s.seen = false;
                }
                for &row in ord {
                    let row = row as usize;
                    let node = node_of[row] as usize;
                    let k = slot[node];
                    if k == OPEN {
                        continue;
                    }
                    let s = &mut scans[k as usize];
                    let v = self.x[(row, f)];
                    if s.seen && v > s.last {
                        let (gt, ht) = stats[node];
                        let (gr, hr) = (gt - s.gl, ht - s.hl);
                        if s.hl >= self.cfg.min_child_weight && hr >= self.cfg.min_child_weight {
                            let gain = split_gain(s.gl, s.hl, gr, hr, self.cfg.lambda, self.cfg.gamma);
                            if gain > s.best_gain {
                                s.best_gain = gain;
                                s.best_feature = f;
                                s.best_threshold = midpoint(s.last, v);
                            }
                        }
                    }
                    s.gl += g[row];
                    s.hl += h[row];
                    s.last = v;
                    s.seen = true;
                }
            }

            let mut next = Vec::new();
            for (k, &node) in frontier.iter().enumerate() {
                let s = scans[k];
                slot[node] = OPEN;
                if s.best_feature == usize::MAX {
                    continue;
                }
                let (l, r) = (stats.len(), stats.len() + 1);
                stats.push((0.0, 0.0));
                stats.push((0.0, 0.0));
                splits.push(None);
                splits.push(None);
                slot.push(OPEN);
                slot.push(OPEN);
                splits[node] = Some((s.best_feature, s.best_threshold, l, r, s.best_gain));
                next.push(l);
                next.push(r);
            }
            if next.is_empty() {
                break;
            }
            // Route rows and accumulate child sums in row order.
            for i in 0..n {
                let node = node_of[i] as usize;
                if let Some((f, thr, l, r, _)) = splits[node] {
                    let child = if self.x[(i, f)] <= thr { l } else { r };
                    node_of[i] = child as u32;
                    stats[child].0 += g[i];
                    stats[child].1 += h[i];
                }
            }
            for (k, &node) in next.iter().enumerate() {
                slot[node] = k as u32;
            }
            frontier = next;
        }

        let nodes = stats
            .iter()
            .zip(&splits)
            .map(|(&(grad, hess), split)| match *split {
                Some((feature, threshold, left, right, gain)) => {
                    RegNode::Split { feature, threshold, left, right, gain, grad, hess }
                }
                None => RegNode::Leaf { weight: leaf_weight(grad, hess, self.cfg.lambda), grad, hess },
            })
            .collect();
        RegressionTree::new(nodes)
    }
}

fn cross_entropy(margins: &Matrix, y: &[usize]) -> f64 {
    let mut total = 0.0;
    for (row, &label) in margins.iter_rows().zip(y) {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + math::ln(row.iter().map(|z| math::exp(z - max)).sum::<f64>());
        total += lse - row[label];
    }
    total / y.len() as f64
}

pub fn fit_gbt(x: &Matrix, y: &[usize], n_classes: usize, cfg: &GbtConfig) -> Result<BoostedEnsemble> {
    let (n, d) = (x.rows(), x.cols());
    if y.len() != n {
        return Err(Error::Dimension { expected: n, got: y.len() });
    }
    if n == 0 {
        return Err(Error::data("no training rows"));
    }
    if n_classes < 2 {
        return Err(Error::param("boosting needs at least two classes"));
    }
    if cfg.rounds == 0 {
        return Err(Error::param("rounds must be at least 1"));
    }
    if !(cfg.learning_rate > 0.0 && cfg.learning_rate <= 1.0) {
        return Err(Error::param(format!("learning rate {} outside (0, 1]", cfg.learning_rate)));
    }
    if !(cfg.lambda >= 0.0) || !(cfg.gamma >= 0.0) || !(cfg.min_child_weight >= 0.0) {
        return Err(Error::param("lambda, gamma and min_child_weight must be nonnegative"));
    }
    if n >= u32::MAX as usize {
        return Err(Error::data("too many rows"));
    }
    let mut counts = vec![0usize; n_classes];
    for &l in y {
        if l >= n_classes {
            return Err(Error::data(format!("label {l} out of range")));
        }
        counts[l] += 1;
    }
    let base_score: Vec<f64> = counts.iter().map(|&c| math::ln((c as f64 / n as f64).max(1e-6))).collect();

    let order: Vec<Vec<u32>> = (0..d)
        .map(|f| {
            let mut o: Vec<u32> = (0..n as u32).collect();
            o.sort_unstable_by(|&a, &b| x[(a as usize, f)].total_cmp(&x[(b as usize, f)]).then(a.cmp(&b)));
            o
        })
        .collect();
    let builder = TreeBuilder { x, order: &order, cfg };

    let mut margins = Matrix::zeros(n, n_classes);
    for i in 0..n {
        margins.row_mut(i).copy_from_slice(&base_score);
    }
    let mut trees = Vec::with_capacity(cfg.rounds * n_classes);
    let mut train_loss = vec![cross_entropy(&margins, y)];
    let mut probs = Matrix::zeros(n, n_classes);
    let mut g = vec![0.0; n];
    let mut h = vec![0.0; n];
    let mut node_of = vec![0u32; n];
    let mut updates = vec![0.0; n * n_classes];
    for round in 0..cfg.rounds {
        for i in 0..n {
            let p = probs.row_mut(i);
            p.copy_from_slice(margins.row(i));
            math::softmax_in_place(p);
        }
        for c in 0..n_classes {
            for i in 0..n {
                let p = probs[(i, c)];
                g[i] = p - if y[i] == c { 1.0 } else { 0.0 };
                h[i] = p * (1.0 - p);
            }
            if g.iter().chain(&h).any(|v| !v.is_finite()) {
                return Err(Error::numeric(format!("non-finite gradient in round {round}")));
            }
            let tree = builder.build(&g, &h, &mut node_of);
            for i in 0..n {
                let RegNode::Leaf { weight, .. } = tree.nodes[node_of[i] as usize] else { unreachable!() };
                updates[i * n_classes + c] = cfg.learning_rate * weight;
            }
            trees.push(tree);
        }
        for i in 0..n {
            for (m, u) in margins.row_mut(i).iter_mut().zip(&updates[i * n_classes..(i + 1) * n_classes]) {
                *m += u;
            }
        }
        train_loss.push(cross_entropy(&margins, y));
    }

    Ok(BoostedEnsemble {
        n_classes,
        n_features: d,
        learning_rate: cfg.learning_rate,
        lambda: cfg.lambda,
        gamma: cfg.gamma,
        base_score,
        trees,
        train_loss,
    })
}

impl BoostedEnsemble {
    pub fn rounds(&self) -> usize {
        self.trees.len() / self.n_classes
    }

    /// The first `rounds` rounds of this ensemble.
    pub fn truncated(&self, rounds: usize) -> BoostedEnsemble {
        let keep = rounds.min(self.rounds()) * self.n_classes;
        BoostedEnsemble {
            trees: self.trees[..keep].to_vec(),
            train_loss: self.train_loss[..(rounds.min(self.rounds()) + 1).min(self.train_loss.len())].to_vec(),
            base_score: self.base_score.clone(),
            ..*self
        }
    }

    /// Pre-softmax per-class scores.
    pub fn margins(&self, x: &Matrix) -> Result<Matrix> {
        check_width(x, self.n_features)?;
        let c = self.n_classes;
        let mut out = Matrix::zeros(x.rows(), c);
        for (i, row) in x.iter_rows().enumerate() {
            let o = out.row_mut(i);
            o.copy_from_slice(&self.base_score);
            for (t, tree) in self.trees.iter().enumerate() {
                o[t % c] += self.learning_rate * tree.value(row);
            }
        }
        Ok(out)
    }

    /// Depth-first leaf ordinal of every row in every tree.
    pub fn leaf_indices(&self, x: &Matrix) -> Result<Vec<Vec<usize>>> {
        check_width(x, self.n_features)?;
        Ok(x.iter_rows().map(|row| self.trees.iter().map(|t| t.leaf_index(row)).collect()).collect())
    }

    /// Total leaf count across trees: the width of the one-hot leaf encoding.
    pub fn total_leaves(&self) -> usize {
        self.trees.iter().map(RegressionTree::n_leaves).sum()
    }

    /// One indicator column per leaf of every tree.
    pub fn leaf_onehot(&self, x: &Matrix) -> Result<Matrix> {
        check_width(x, self.n_features)?;
        let mut out = Matrix::zeros(x.rows(), self.total_leaves());
        for (i, row) in x.iter_rows().enumerate() {
            let o = out.row_mut(i);
            let mut offset = 0;
            for t in &self.trees {
                o[offset + t.leaf_index(row)] = 1.0;
                offset += t.n_leaves();
            }
        }
        Ok(out)
    }
}

pub fn predict_gbt(m: &BoostedEnsemble, x: &Matrix) -> Result<Matrix> {
    m.predict_proba(x)
}

pub fn extract_margins(m: &BoostedEnsemble, x: &Matrix) -> Result<Matrix> {
    m.margins(x)
}

pub fn extract_leaf_indices(m: &BoostedEnsemble, x: &Matrix) -> Result<Vec<Vec<usize>>> {
    m.leaf_indices(x)
}

impl Model for BoostedEnsemble {
    fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn n_features(&self) -> usize {
        self.n_features
    }

    fn predict_proba(&self, x: &Matrix) -> Result<Matrix> {
        let mut m = self.margins(x)?;
        for i in 0..m.rows() {
            math::softmax_in_place(m.row_mut(i));
        }
        Ok(m)
    }
}

impl Persist for BoostedEnsemble {
    const KIND: &'static str = "gbt";

    fn to_params(&self) -> ParamSet {
        let mut offsets = vec![0.0];
        let (mut feature, mut threshold, mut left, mut right) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        let (mut weight, mut gain, mut grad, mut hess) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for t in &self.trees {
            for node in &t.nodes {
                match *node {
                    RegNode::Split { feature: f, threshold: th, left: l, right: r, gain: gn, grad: g, hess: h } => {
                        feature.push(f as f64);
                        threshold.push(th);
                        left.push(l as f64);
                        right.push(r as f64);
                        weight.push(0.0);
                        gain.push(gn);
                        grad.push(g);
                        hess.push(h);
                    }
                    RegNode::Leaf { weight: w, grad: g, hess: h } => {
                        feature.push(-1.0);
                        threshold.push(0.0);
                        left.push(0.0);
                        right.push(0.0);
                        weight.push(w);
                        gain.push(0.0);
                        grad.push(g);
                        hess.push(h);
                    }
                }
            }
            offsets.push(feature.len() as f64);
        }
        let mut p = ParamSet::new();
        p.push_scalar("n_classes", self.n_classes as f64);
        p.push_scalar("n_features", self.n_features as f64);
        p.push_scalar("learning_rate", self.learning_rate);
        p.push_scalar("lambda", self.lambda);
        p.push_scalar("gamma", self.gamma);
        p.push_vec("base_score", &self.base_score);
        p.push_vec("train_loss", &self.train_loss);
        p.push_vec("tree_offsets", &offsets);
        p.push_vec("feature", &feature);
        p.push_vec("threshold", &threshold);
        p.push_vec("left", &left);
        p.push_vec("right", &right);
        p.push_vec("weight", &weight);
        p.push_vec("gain", &gain);
        p.push_vec("grad", &grad);
        p.push_vec("hess", &hess);
        p
    }

    fn from_params(p: &ParamSet) -> Result<Self> {
        let offsets = p.vector("tree_offsets")?;
        let feature = p.vector("feature")?;
        let threshold = p.vector("threshold")?;
        let left = p.vector("left")?;
        let right = p.vector("right")?;
        let weight = p.vector("weight")?;
        let gain = p.vector("gain")?;
        let grad = p.vector("grad")?;
        let hess = p.vector("hess")?;
        let total = feature.len();
        if [threshold.len(), left.len(), right.len(), weight.len(), gain.len(), grad.len(), hess.len()]
            .iter()
            .any(|&l| l != total)
        {
            return Err(Error::data("inconsistent boosted tree arrays"));
        }
        let mut trees = Vec::with_capacity(offsets.len().saturating_sub(1));
        for w in offsets.windows(2) {
            let (a, b) = (w[0] as usize, w[1] as usize);
            if a >= b || b > total {
                return Err(Error::data("bad tree offsets"));
            }
            let mut nodes = Vec::with_capacity(b - a);
            for i in a..b {
                nodes.push(if feature[i] < 0.0 {
                    RegNode::Leaf { weight: weight[i], grad: grad[i], hess: hess[i] }
                } else {
                    let (l, r) = (left[i] as usize, right[i] as usize);
                    if l >= b - a || r >= b - a {
                        return Err(Error::data("tree child index out of range"));
                    }
                    RegNode::Split {
                        feature: feature[i] as usize,
                        threshold: threshold[i],
                        left: l,
                        right: r,
                        gain: gain[i],
                        grad: grad[i],
                        hess: hess[i],
                    }
                });
            }
            trees.push(RegressionTree::new(nodes));
        }
        let n_classes = p.count("n_classes")?;
        if n_classes == 0 || trees.len() % n_classes != 0 {
            return Err(Error::data("tree count is not a multiple of the class count"));
        }
        Ok(BoostedEnsemble {
            n_classes,
            n_features: p.count("n_features")?,
            learning_rate: p.scalar("learning_rate")?,
            lambda: p.scalar("lambda")?,
            gamma: p.scalar("gamma")?,
            base_score: p.vector("base_score")?,
            trees,
            train_loss: p.vector("train_loss")?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line() -> (Matrix, Vec<usize>) {
        (Matrix::from_rows(&[[0.0], [1.0], [2.0], [3.0]]), alloc::vec![0, 0, 1, 1])
    }

    fn stump() -> GbtConfig {
        GbtConfig { rounds: 1, max_depth: 1, min_child_weight: 0.0, ..GbtConfig::default() }
    }

    #[test]
    fn stump_splits_between_classes() {
        let (x, y) = line();
        let m = fit_gbt(&x, &y, 2, &stump()).unwrap();
        assert_eq!(m.trees.len(), 2);
        for t in &m.trees {
            assert!(matches!(t.nodes[0], RegNode::Split { feature: 0, threshold, .. } if threshold == 1.5));
        }
        assert_eq!(m.predict(&x).unwrap(), y);
    }

    #[test]
    fn zero_rounds_predicts_priors() {
        let (x, y) = line();
        let m = fit_gbt(&x, &y, 2, &stump()).unwrap().truncated(0);
        let p = m.predict_proba(&Matrix::from_rows(&[[-4.0], [9.0]])).unwrap();
        assert!(p.as_slice().iter().all(|&v| (v - 0.5).abs() < 1e-15));
        assert_eq!(m.margins(&x).unwrap().row(0), &m.base_score[..]);
    }

    #[test]
    fn single_class_collapses() {
        let x = Matrix::from_rows(&[[0.0], [1.0], [2.0], [3.0], [4.0]]);
        let y = [1, 1, 1, 1, 1];
        let m = fit_gbt(&x, &y, 3, &GbtConfig { rounds: 5, ..GbtConfig::default() }).unwrap();
        assert!(m.trees.iter().all(RegressionTree::is_bare_root));
        assert_eq!(m.predict(&Matrix::from_rows(&[[-10.0], [2.5], [100.0]])).unwrap(), [1, 1, 1]);
    }

    #[test]
    fn leaf_indices_of_a_stump() {
        let (x, y) = line();
        let m = fit_gbt(&x, &y, 2, &stump()).unwrap();
        let idx = m.leaf_indices(&x).unwrap();
        assert_eq!(idx, alloc::vec![alloc::vec![0, 0], alloc::vec![0, 0], alloc::vec![1, 1], alloc::vec![1, 1]]);
        let onehot = m.leaf_onehot(&x).unwrap();
        for r in onehot.iter_rows() {
            assert_eq!(r.iter().sum::<f64>(), 2.0);
        }
    }

    #[test]
    fn rejects_bad_config() {
        let (x, y) = line();
        assert!(fit_gbt(&x, &y, 2, &GbtConfig { rounds: 0, ..stump() }).is_err());
        assert!(fit_gbt(&x, &y, 2, &GbtConfig { learning_rate: 0.0, ..stump() }).is_err());
        assert!(fit_gbt(&x, &y, 2, &GbtConfig { learning_rate: 1.5, ..stump() }).is_err());
        let m = fit_gbt(&x, &y, 2, &stump()).unwrap();
        assert!(m.margins(&Matrix::zeros(1, 2)).is_err());
    }

    #[test]
    fn persist_round_trip() {
        let x = Matrix::from_rows(&[[0.0, 1.0], [1.0, 3.0], [2.0, 0.5], [3.0, 2.0], [4.0, 4.0], [5.0, 0.0]]);
        let y = [0, 1, 2, 0, 1, 2];
        let m = fit_gbt(&x, &y, 3, &GbtConfig { rounds: 3, min_child_weight: 0.0, ..GbtConfig::default() }).unwrap();
        let q = BoostedEnsemble::from_params(&m.to_params()).unwrap();
        assert_eq!(q, m);
    }
}
