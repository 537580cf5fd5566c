//! Linear discriminant analysis, both as a supervised projection and as a
//! Gaussian classifier with shared within-class covariance.
//!
//! The projection solves `S_b v = λ (S_w + ridge·I) v` by whitening with the
//! Cholesky factor of the regularized within-class scatter and running a
//! symmetric eigendecomposition. Components come out normalized so that
//! `vᵀ (S_w + ridge·I) v = 1`, ordered by descending eigenvalue, with the
//! largest-magnitude entry of each made positive.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result, Warning};
use crate::frame::Frame;
use crate::linalg::{self, Matrix};
use crate::math;
use crate::model::{check_width, Model};
use crate::params::{ParamSet, Persist};

#[derive(Debug, Clone, PartialEq)]
pub struct LdaConfig {
    pub n_components: usize,
    /// Added to the diagonal of `S_w`. `None` picks `1e-6 · trace(S_w) / d`.
    pub ridge: Option<f64>,
}

impl Default for LdaConfig {
    fn default() -> Self {
        LdaConfig { n_components: usize::MAX, ridge: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionLda {
    pub class_means: Matrix,
    pub grand_mean: Vec<f64>,
    pub within_scatter: Matrix,
    pub between_scatter: Matrix,
    /// d × m, one discriminant direction per column.
    pub components: Matrix,
    pub eigenvalues: Vec<f64>,
    pub class_priors: Vec<f64>,
    pub ridge: f64,
    pub n_train: usize,
    pub requested_components: usize,
    pub warnings: Vec<Warning>,
    // Shared-covariance discriminant: Σ⁻¹(μ_c − μ̄) and the per-class offsets.
    coef: Matrix,
    offset: Vec<f64>,
}

pub fn fit_lda(x: &Matrix, labels: &[usize], n_classes: usize, cfg: &LdaConfig) -> Result<ProjectionLda> {
    let (n, d) = (x.rows(), x.cols());
    if labels.len() != n {
        return Err(Error::Dimension { expected: n, got: labels.len() });
    }
    if n_classes < 2 {
        return Err(Error::data("LDA needs at least two classes"));
    }
    if cfg.n_components == 0 {
        return Err(Error::param("n_components must be at least 1"));
    }
    if d == 0 {
        return Err(Error::data("LDA needs at least one feature"));
    }

    let mut counts = vec![0usize; n_classes];
    let mut class_means = Matrix::zeros(n_classes, d);
    for (row, &l) in x.iter_rows().zip(labels) {
        if l >= n_classes {
            return Err(Error::data(format!("label {l} out of range")));
        }
        counts[l] += 1;
        for (m, v) in class_means.row_mut(l).iter_mut().zip(row) {
            *m += v;
        }
    }
    if let Some(c) = counts.iter().position(|&k| k < 2) {
        return Err(Error::data(format!("class {c} has fewer than 2 rows")));
    }
    for c in 0..n_classes {
        let k = counts[c] as f64;
        class_means.row_mut(c).iter_mut().for_each(|m| *m /= k);
    }
    let mut grand_mean = vec![0.0; d];
    for c in 0..n_classes {
        for (g, m) in grand_mean.iter_mut().zip(class_means.row(c)) {
            *g += counts[c] as f64 * m;
        }
    }
    grand_mean.iter_mut().for_each(|g| *g /= n as f64);

    let mut within = Matrix::zeros(d, d);
    let mut centered = vec![0.0; d];
    for (row, &l) in x.iter_rows().zip(labels) {
        for ((c, v), m) in centered.iter_mut().zip(row).zip(class_means.row(l)) {
            *c = v - m;
        }
        add_outer(&mut within, &centered, 1.0);
    }
    let mut between = Matrix::zeros(d, d);
    for c in 0..n_classes {
        for ((o, m), g) in centered.iter_mut().zip(class_means.row(c)).zip(&grand_mean) {
            *o = m - g;
        }
        add_outer(&mut between, &centered, counts[c] as f64);
    }
    within.symmetrize();
    between.symmetrize();

    let ridge = cfg.ridge.unwrap_or(1e-6 * within.trace() / d as f64);
    if !(ridge >= 0.0) || !ridge.is_finite() {
        return Err(Error::param(format!("ridge {ridge} must be a finite nonnegative number")));
    }
    let mut regularized = within.clone();
    regularized.add_diagonal(ridge);
    let chol = linalg::cholesky(&regularized).map_err(|_| {
        Error::numeric(if ridge == 0.0 {
            String::from("within-class scatter is singular; use a positive ridge")
        } else {
            format!("within-class scatter is singular even with ridge {ridge}")
        })
    })?;

    // A = L⁻¹ S_b L⁻ᵀ
    let mut y = Matrix::zeros(d, d);
    for j in 0..d {
        let col = linalg::solve_lower(&chol, &between.column(j));
        for i in 0..d {
            y[(i, j)] = col[i];
        }
    }
    let yt = y.transpose();
    let mut a = Matrix::zeros(d, d);
    for j in 0..d {
        let col = linalg::solve_lower(&chol, &yt.column(j));
        for i in 0..d {
            a[(j, i)] = col[i];
        }
    }
    a.symmetrize();
    let (values, vectors) = linalg::symmetric_eigen(&a);

    let cap = (n_classes - 1).min(d);
    let m = cfg.n_components.min(cap);
    let mut warnings = Vec::new();
    if cfg.n_components > cap && cfg.n_components != usize::MAX {
        warnings.push(Warning::new(
            "lda_components_clamped",
            format!("requested {} discriminant components; at most {cap} exist, kept {m}", cfg.n_components),
        ));
    }
    let mut components = Matrix::zeros(d, m);
    let mut eigenvalues = Vec::with_capacity(m);
    for k in 0..m {
        let mut v = linalg::solve_lower_transpose(&chol, &vectors.column(k));
        let mut big = 0;
        for i in 1..d {
            if v[i].abs() > v[big].abs() {
                big = i;
            }
        }
        if v[big] < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        for i in 0..d {
            components[(i, k)] = v[i];
        }
        eigenvalues.push(values[k].max(0.0));
    }

    let class_priors = counts.iter().map(|&k| k as f64 / n as f64).collect();
    let mut p = ProjectionLda {
        class_means,
        grand_mean,
        within_scatter: within,
        between_scatter: between,
        components,
        eigenvalues,
        class_priors,
        ridge,
        n_train: n,
        requested_components: cfg.n_components,
        warnings,
        coef: Matrix::zeros(0, 0),
        offset: Vec::new(),
    };
    p.prepare_classifier()?;
    Ok(p)
}

/// Fits on a labeled numeric frame.
pub fn fit_lda_frame(train: &Frame, cfg: &LdaConfig) -> Result<ProjectionLda> {
    let t = train.require_target()?;
    fit_lda(&train.feature_matrix()?, t.labels(), t.n_classes(), cfg)
}

fn add_outer(m: &mut Matrix, v: &[f64], w: f64) {
    let d = v.len();
    for i in 0..d {
        let vi = w * v[i];
        if vi == 0.0 {
            continue;
        }
        let row = m.row_mut(i);
        for j in 0..d {
            row[j] += vi * v[j];
        }
    }
}

impl ProjectionLda {
    pub fn n_components(&self) -> usize {
        self.components.cols()
    }

    pub fn dim(&self) -> usize {
        self.grand_mean.len()
    }

    /// Shared covariance `S_w / (n − C) + ridge·I` used by the classifier.
    pub fn shared_covariance(&self) -> Result<Matrix> {
        let c = self.class_priors.len();
        if self.n_train <= c {
            return Err(Error::data("LDA classifier needs more rows than classes"));
        }
        let mut cov = self.within_scatter.clone();
        cov.scale(1.0 / (self.n_train - c) as f64);
        cov.add_diagonal(self.ridge);
        Ok(cov)
    }

    fn prepare_classifier(&mut self) -> Result<()> {
        let cov = self.shared_covariance()?;
        let inv = linalg::spd_inverse(&cov)
            .map_err(|_| Error::numeric("shared covariance is singular; use a positive ridge"))?;
        let (c, d) = (self.class_priors.len(), self.dim());
        let mut coef = Matrix::zeros(c, d);
        let mut offset = Vec::with_capacity(c);
        for k in 0..c {
            let delta: Vec<f64> = self.class_means.row(k).iter().zip(&self.grand_mean).map(|(m, g)| m - g).collect();
            let w = inv.mat_vec(&delta);
            offset.push(-0.5 * linalg::dot(&w, &delta) + math::ln(self.class_priors[k]));
            coef.row_mut(k).copy_from_slice(&w);
        }
        self.coef = coef;
        self.offset = offset;
        Ok(())
    }

    /// Projects rows onto the discriminant components: `(x − μ̄)ᵀ W`.
    pub fn transform(&self, x: &Matrix) -> Result<Matrix> {
        check_width(x, self.dim())?;
        let m = self.n_components();
        let mut out = Matrix::zeros(x.rows(), m);
        let mut centered = vec![0.0; self.dim()];
        for (i, row) in x.iter_rows().enumerate() {
            for ((c, v), g) in centered.iter_mut().zip(row).zip(&self.grand_mean) {
                *c = v - g;
            }
            let o = out.row_mut(i);
            for (j, &cj) in centered.iter().enumerate() {
                if cj == 0.0 {
                    continue;
                }
                for k in 0..m {
                    o[k] += cj * self.components[(j, k)];
                }
            }
        }
        Ok(out)
    }

    /// Frame version of [`transform`](Self::transform): columns `LD1..LDm`,
    /// target carried through.
    pub fn transform_frame(&self, f: &Frame) -> Result<Frame> {
        let z = self.transform(&f.feature_matrix()?)?;
        let names = (1..=self.n_components()).map(|k| format!("LD{k}")).collect();
        let out = Frame::from_matrix(names, &z)?;
        match f.target() {
            Some(t) => out.with_target(t.clone()),
            None => Ok(out),
        }
    }

    /// Per-class linear discriminant scores (before softmax).
    pub fn discriminants(&self, x: &Matrix) -> Result<Matrix> {
        check_width(x, self.dim())?;
        let c = self.class_priors.len();
        let mut out = Matrix::zeros(x.rows(), c);
        let mut centered = vec![0.0; self.dim()];
        for (i, row) in x.iter_rows().enumerate() {
            for ((cv, v), g) in centered.iter_mut().zip(row).zip(&self.grand_mean) {
                *cv = v - g;
            }
            for k in 0..c {
                out[(i, k)] = linalg::dot(&centered, self.coef.row(k)) + self.offset[k];
            }
        }
        Ok(out)
    }
}

impl Model for ProjectionLda {
    fn n_classes(&self) -> usize {
        self.class_priors.len()
    }

    fn n_features(&self) -> usize {
        self.dim()
    }

    fn predict_proba(&self, x: &Matrix) -> Result<Matrix> {
        let mut s = self.discriminants(x)?;
        for i in 0..s.rows() {
            math::softmax_in_place(s.row_mut(i));
        }
        Ok(s)
    }
}

impl Persist for ProjectionLda {
    const KIND: &'static str = "lda";

    fn to_params(&self) -> ParamSet {
        let mut p = ParamSet::new();
        p.push_matrix("class_means", &self.class_means);
        p.push_vec("grand_mean", &self.grand_mean);
        p.push_matrix("within_scatter", &self.within_scatter);
        p.push_matrix("between_scatter", &self.between_scatter);
        p.push_matrix("components", &self.components);
        p.push_vec("eigenvalues", &self.eigenvalues);
        p.push_vec("class_priors", &self.class_priors);
        p.push_scalar("ridge", self.ridge);
        p.push_scalar("n_train", self.n_train as f64);
        p
    }

    fn from_params(p: &ParamSet) -> Result<Self> {
        let components = p.matrix("components")?;
        let mut lda = ProjectionLda {
            class_means: p.matrix("class_means")?,
            grand_mean: p.vector("grand_mean")?,
            within_scatter: p.matrix("within_scatter")?,
            between_scatter: p.matrix("between_scatter")?,
            requested_components: components.cols(),
            components,
            eigenvalues: p.vector("eigenvalues")?,
            class_priors: p.vector("class_priors")?,
            ridge: p.scalar("ridge")?,
            n_train: p.count("n_train")?,
            warnings: Vec::new(),
            coef: Matrix::zeros(0, 0),
            offset: Vec::new(),
        };
        lda.prepare_classifier()?;
        Ok(lda)
    }
}
