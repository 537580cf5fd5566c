//! Model-agnostic explanations: LIME local surrogates and Morris
//! elementary-effects screening.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{cholesky_solve, Matrix};
use crate::math;
use crate::model::Model;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankedFeature {
    pub index: usize,
    pub score: f64,
}

/// Descending by score, ties broken by the smaller feature index.
pub fn rank_features(scores: &[(usize, f64)]) -> Vec<RankedFeature> {
    let mut out: Vec<RankedFeature> = scores.iter().map(|&(index, score)| RankedFeature { index, score }).collect();
    out.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.index.cmp(&b.index)));
    out
}

// ---------------------------------------------------------------------------
// LIME

#[derive(Debug, Clone, PartialEq)]
pub struct LimeConfig {
    pub n_samples: usize,
    /// `None` means `0.75 * sqrt(d)`.
    pub kernel_width: Option<f64>,
    /// How many features to report.
    pub n_features: usize,
    pub seed: u64,
}

impl Default for LimeConfig {
    fn default() -> Self {
        LimeConfig { n_samples: 5000, kernel_width: None, n_features: 10, seed: 0 }
    }
}

pub const LIME_RIDGE: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct LimeExplanation {
    pub row_index: Option<usize>,
    pub class: usize,
    /// Surrogate coefficient per feature, on the standardized scale. Zero for
    /// features with no background variance.
    pub weights: Vec<f64>,
    /// Reported features with `|w| / Σ|w|` over the reported set, ranked.
    pub importances: Vec<RankedFeature>,
    pub intercept: f64,
    /// Weighted R² of the surrogate on the perturbation sample.
    pub r_squared: f64,
    pub kernel_width: f64,
    pub n_samples: usize,
    pub seed: u64,
    /// Features skipped because their background standard deviation is zero.
    pub constant_features: Vec<usize>,
}

impl LimeExplanation {
    pub fn ranking(&self) -> Vec<RankedFeature> {
        self.importances.clone()
    }
}

/// Explains `model`'s probability for `class` near `row`.
pub fn lime_explain<M: Model + ?Sized>(
    model: &M,
    background: &Matrix,
    row: &[f64],
    class: usize,
    cfg: &LimeConfig,
) -> Result<LimeExplanation> {
    let d = row.len();
    if background.rows() == 0 {
        return Err(Error::data("background sample is empty"));
    }
    if background.cols() != d || model.n_features() != d {
        return Err(Error::Dimension { expected: d, got: background.cols() });
    }
    if class >= model.n_classes() {
        return Err(Error::param(format!("class {class} out of range")));
    }
    if cfg.n_samples < 2 {
        return Err(Error::param("LIME needs at least two samples"));
    }
    let n = background.rows() as f64;
    let std: Vec<f64> = (0..d)
        .map(|j| {
            let col = background.column(j);
            let mean = col.iter().sum::<f64>() / n;
            math::sqrt(col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n)
        })
        .collect();
    let active: Vec<usize> = (0..d).filter(|&j| std[j] > 0.0 && std[j].is_finite()).collect();
    if active.is_empty() {
        return Err(Error::data("every background feature has zero variance"));
    }
    let constant_features: Vec<usize> = (0..d).filter(|j| !active.contains(j)).collect();
    let kernel_width = cfg.kernel_width.unwrap_or(0.75 * math::sqrt(d as f64));
    if !(kernel_width > 0.0) {
        return Err(Error::param("kernel width must be positive"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let k = active.len();
    let mut scaled = Matrix::zeros(cfg.n_samples, k);
    let mut points = Matrix::zeros(cfg.n_samples, d);
    let mut w = vec![0.0; cfg.n_samples];
    for i in 0..cfg.n_samples {
        points.row_mut(i).copy_from_slice(row);
        let mut dist2 = 0.0;
        for (a, &j) in active.iter().enumerate() {
            let e = math::standard_normal(&mut rng);
            scaled[(i, a)] = e;
            points[(i, j)] = row[j] + std[j] * e;
            dist2 += e * e;
        }
        w[i] = math::exp(-dist2 / (kernel_width * kernel_width));
    }
    let target = model.predict_proba(&points)?.column(class);

    // Weighted ridge with an unpenalized intercept: center by weighted means.
    let sw: f64 = w.iter().sum();
    if !(sw > 0.0) {
        return Err(Error::numeric("all kernel weights underflowed; widen the kernel"));
    }
    let xbar: Vec<f64> = (0..k).map(|a| (0..cfg.n_samples).map(|i| w[i] * scaled[(i, a)]).sum::<f64>() / sw).collect();
    let ybar = w.iter().zip(&target).map(|(wi, yi)| wi * yi).sum::<f64>() / sw;
    let mut gram = Matrix::zeros(k, k);
    let mut rhs = vec![0.0; k];
    let mut xc = vec![0.0; k];
    for i in 0..cfg.n_samples {
        for a in 0..k {
            xc[a] = scaled[(i, a)] - xbar[a];
        }
        let yc = target[i] - ybar;
        for a in 0..k {
            rhs[a] += w[i] * xc[a] * yc;
            for b in 0..=a {
                gram[(a, b)] += w[i] * xc[a] * xc[b];
            }
        }
    }
    for a in 0..k {
        for b in 0..a {
            gram[(b, a)] = gram[(a, b)];
        }
    }
    gram.add_diagonal(LIME_RIDGE);
    let beta = cholesky_solve(&gram, &rhs)?;
    let intercept = ybar - beta.iter().zip(&xbar).map(|(b, x)| b * x).sum::<f64>();

    let (mut ss_res, mut ss_tot) = (0.0, 0.0);
    for i in 0..cfg.n_samples {
        let fit = intercept + (0..k).map(|a| beta[a] * scaled[(i, a)]).sum::<f64>();
        ss_res += w[i] * (target[i] - fit) * (target[i] - fit);
        ss_tot += w[i] * (target[i] - ybar) * (target[i] - ybar);
    }
    let r_squared = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };

    let mut weights = vec![0.0; d];
    for (a, &j) in active.iter().enumerate() {
        weights[j] = beta[a];
    }
    let top: Vec<RankedFeature> = rank_features(&active.iter().map(|&j| (j, weights[j].abs())).collect::<Vec<_>>())
        .into_iter()
        .take(cfg.n_features.max(1))
        .collect();
    let total: f64 = top.iter().map(|f| f.score).sum();
    let importances = top
        .into_iter()
        .map(|f| RankedFeature { index: f.index, score: if total > 0.0 { f.score / total } else { 0.0 } })
        .collect();

    Ok(LimeExplanation {
        row_index: None,
        class,
        weights,
        importances,
        intercept,
        r_squared,
        kernel_width,
        n_samples: cfg.n_samples,
        seed: cfg.seed,
        constant_features,
    })
}

// ---------------------------------------------------------------------------
// Morris screening

#[derive(Debug, Clone, PartialEq)]
pub struct MorrisConfig {
    pub trajectories: usize,
    pub levels: usize,
    /// `None` means `p / (2(p - 1))`.
    pub delta: Option<f64>,
    pub seed: u64,
}

impl Default for MorrisConfig {
    fn default() -> Self {
        MorrisConfig { trajectories: 20, levels: 4, delta: None, seed: 0 }
    }
}

/// Which scalar of the model is screened.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MorrisOutput {
    ClassProb(usize),
    /// Probability of the class predicted at the midpoint of the ranges.
    #[default]
    PredictedClassProb,
}

/// One OAT path through the unit cube over the screened features.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// `k + 1` points in unit coordinates, one column per screened feature.
    pub points: Matrix,
    /// Screened-feature position changed at each step.
    pub order: Vec<usize>,
    /// Signed step taken at each step.
    pub steps: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MorrisScreening {
    pub mu: Vec<f64>,
    pub mu_star: Vec<f64>,
    pub sigma: Vec<f64>,
    pub trajectories: Vec<Trajectory>,
    pub levels: usize,
    pub delta: f64,
    pub ranges: Vec<(f64, f64)>,
    /// Features with `min >= max`; their statistics are reported as zero.
    pub excluded: Vec<usize>,
    pub class: usize,
    pub seed: u64,
}

impl MorrisScreening {
    pub fn n_trajectories(&self) -> usize {
        self.trajectories.len()
    }

    /// Screened features by μ* descending.
    pub fn ranking(&self) -> Vec<RankedFeature> {
        let scores: Vec<(usize, f64)> =
            (0..self.mu_star.len()).filter(|j| !self.excluded.contains(j)).map(|j| (j, self.mu_star[j])).collect();
        rank_features(&scores)
    }
}

/// Random OAT trajectories on the `levels`-point grid in `[0, 1]^k`.
pub fn morris_trajectories(k: usize, cfg: &MorrisConfig) -> Result<(Vec<Trajectory>, f64)> {
    if cfg.trajectories < 2 {
        return Err(Error::param("Morris screening needs at least two trajectories"));
    }
    if cfg.levels < 2 {
        return Err(Error::param("Morris screening needs at least two levels"));
    }
    let p = cfg.levels;
    let unit = 1.0 / (p - 1) as f64;
    let delta = cfg.delta.unwrap_or(p as f64 / (2.0 * (p - 1) as f64));
    let steps = delta / unit;
    if !(delta > 0.0 && delta <= 1.0) || (steps - math::round(steps)).abs() > 1e-9 {
        return Err(Error::param(format!("delta {delta} must be a positive multiple of 1/{} no larger than 1", p - 1)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut out = Vec::with_capacity(cfg.trajectories);
    for _ in 0..cfg.trajectories {
        let mut x: Vec<f64> = (0..k).map(|_| rng.gen_range(0..p) as f64 * unit).collect();
        let mut order: Vec<usize> = (0..k).collect();
        order.shuffle(&mut rng);
        let mut points = Matrix::zeros(0, k);
        points.push_row(&x);
        let mut signed = Vec::with_capacity(k);
        for &j in &order {
            let s = if x[j] + delta <= 1.0 + 1e-12 { delta } else { -delta };
            x[j] += s;
            // Snap to the grid to keep coordinates exact.
            x[j] = math::round(x[j] / unit) * unit;
            points.push_row(&x);
            signed.push(s);
        }
        out.push(Trajectory { points, order, steps: signed });
    }
    Ok((out, delta))
}

pub fn morris_screen<M: Model + ?Sized>(
    model: &M,
    ranges: &[(f64, f64)],
    output: MorrisOutput,
    cfg: &MorrisConfig,
) -> Result<MorrisScreening> {
    let d = ranges.len();
    if model.n_features() != d {
        return Err(Error::Dimension { expected: model.n_features(), got: d });
    }
    if ranges.iter().any(|(a, b)| !a.is_finite() || !b.is_finite()) {
        return Err(Error::data("Morris ranges must be finite"));
    }
    let active: Vec<usize> = (0..d).filter(|&j| ranges[j].0 < ranges[j].1).collect();
    let excluded: Vec<usize> = (0..d).filter(|j| !active.contains(j)).collect();
    let k = active.len();

    let midpoint: Vec<f64> = ranges.iter().map(|(a, b)| 0.5 * (a + b)).collect();
    let class = match output {
        MorrisOutput::ClassProb(c) if c < model.n_classes() => c,
        MorrisOutput::ClassProb(c) => return Err(Error::param(format!("class {c} out of range"))),
        MorrisOutput::PredictedClassProb => model.predict(&Matrix::from_rows(&[&midpoint[..]]))?[0],
    };

    let (trajectories, delta) = morris_trajectories(k, cfg)?;
    let r = trajectories.len();
    let mut design = Matrix::zeros(r * (k + 1), d);
    for (t, traj) in trajectories.iter().enumerate() {
        for s in 0..=k {
            let row = design.row_mut(t * (k + 1) + s);
            for (j, v) in row.iter_mut().enumerate() {
                *v = ranges[j].0;
            }
            for (a, &j) in active.iter().enumerate() {
                let (lo, hi) = ranges[j];
                row[j] = lo + traj.points[(s, a)] * (hi - lo);
            }
        }
    }
    let f = model.predict_proba(&design)?.column(class);

    let mut effects = vec![Vec::with_capacity(r); k];
    for (t, traj) in trajectories.iter().enumerate() {
        for (s, (&a, &step)) in traj.order.iter().zip(&traj.steps).enumerate() {
            let before = f[t * (k + 1) + s];
            let after = f[t * (k + 1) + s + 1];
            effects[a].push((after - before) / step);
        }
    }
    let (mut mu, mut mu_star, mut sigma) = (vec![0.0; d], vec![0.0; d], vec![0.0; d]);
    for (a, &j) in active.iter().enumerate() {
        let e = &effects[a];
        let m = e.iter().sum::<f64>() / r as f64;
        mu[j] = m;
        mu_star[j] = e.iter().map(|v| v.abs()).sum::<f64>() / r as f64;
        sigma[j] = math::sqrt(e.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (r - 1) as f64);
    }
    Ok(MorrisScreening {
        mu,
        mu_star,
        sigma,
        trajectories,
        levels: cfg.levels,
        delta,
        ranges: ranges.to_vec(),
        excluded,
        class,
        seed: cfg.seed,
    })
}

/// Observed per-feature `[min, max]` of a matrix.
pub fn feature_ranges(x: &Matrix) -> Vec<(f64, f64)> {
    (0..x.cols())
        .map(|j| x.column(j).iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v))))
        .collect()
}
