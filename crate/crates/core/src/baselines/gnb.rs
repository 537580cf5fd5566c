use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::math;
use crate::model::{check_width, Model};
use crate::params::{ParamSet, Persist};

/// Gaussian naive Bayes.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianNb {
    /// C × d
    pub means: Matrix,
    /// C × d, already floored.
    pub variances: Matrix,
    pub priors: Vec<f64>,
}

/// Sum of values in ascending order, so the result does not depend on the
/// order rows arrived in.
fn ordered_sum(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    v.iter().sum()
}

fn mean_and_variance(v: &mut [f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = ordered_sum(v) / n;
    let mut sq: Vec<f64> = v.iter().map(|x| (x - mean) * (x - mean)).collect();
    (mean, ordered_sum(&mut sq) / n)
}

/// Per-class, per-feature Gaussians with variances floored at
/// `var_smoothing × (largest feature variance)`.
pub fn fit_gnb(x: &Matrix, y: &[usize], n_classes: usize, var_smoothing: f64) -> Result<GaussianNb> {
    let (n, d) = (x.rows(), x.cols());
    if y.len() != n {
        return Err(Error::Dimension { expected: n, got: y.len() });
    }
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
    for (i, &l) in y.iter().enumerate() {
        if l >= n_classes {
            return Err(Error::data(format!("label {l} out of range")));
        }
        members[l].push(i);
    }
    if let Some(c) = members.iter().position(Vec::is_empty) {
        return Err(Error::data(format!("class {c} has no training rows")));
    }

    let mut max_var = 0.0f64;
    for j in 0..d {
        let (_, v) = mean_and_variance(&mut x.column(j));
        max_var = max_var.max(v);
    }
    let floor = if max_var > 0.0 { var_smoothing * max_var } else { var_smoothing };
    if !(floor > 0.0) {
        return Err(Error::param("var_smoothing must be positive"));
    }

    let mut means = Matrix::zeros(n_classes, d);
    let mut variances = Matrix::zeros(n_classes, d);
    for (c, rows) in members.iter().enumerate() {
        for j in 0..d {
            let mut vals: Vec<f64> = rows.iter().map(|&i| x[(i, j)]).collect();
            let (m, v) = mean_and_variance(&mut vals);
            means[(c, j)] = m;
            variances[(c, j)] = v.max(floor);
        }
    }
    let priors = members.iter().map(|m| m.len() as f64 / n as f64).collect();
    Ok(GaussianNb { means, variances, priors })
}

impl GaussianNb {
    pub fn joint_log_likelihood(&self, row: &[f64], out: &mut [f64]) {
        let tau = core::f64::consts::TAU;
        for (c, o) in out.iter_mut().enumerate() {
            let mut s = math::ln(self.priors[c]);
            for ((&v, &m), &var) in row.iter().zip(self.means.row(c)).zip(self.variances.row(c)) {
                s -= 0.5 * math::ln(tau * var) + (v - m) * (v - m) / (2.0 * var);
            }
            *o = s;
        }
    }
}

impl Model for GaussianNb {
    fn n_classes(&self) -> usize {
        self.priors.len()
    }

    fn n_features(&self) -> usize {
        self.means.cols()
    }

    fn predict_proba(&self, x: &Matrix) -> Result<Matrix> {
        check_width(x, self.n_features())?;
        let mut out = Matrix::zeros(x.rows(), self.n_classes());
        for (i, row) in x.iter_rows().enumerate() {
            let o = out.row_mut(i);
            self.joint_log_likelihood(row, o);
            math::softmax_in_place(o);
        }
        Ok(out)
    }
}

impl Persist for GaussianNb {
    const KIND: &'static str = "gnb";

    fn to_params(&self) -> ParamSet {
        let mut p = ParamSet::new();
        p.push_matrix("means", &self.means);
        p.push_matrix("variances", &self.variances);
        p.push_vec("priors", &self.priors);
        p
    }

    fn from_params(p: &ParamSet) -> Result<Self> {
        Ok(GaussianNb { means: p.matrix("means")?, variances: p.matrix("variances")?, priors: p.vector("priors")? })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uninformative_feature_returns_priors() {
        let x = Matrix::from_rows(&[[1.0], [3.0], [1.0], [3.0], [1.0], [3.0]]);
        let m = fit_gnb(&x, &[0, 0, 1, 1, 1, 1], 2, 1e-9).unwrap();
        let p = m.predict_proba(&Matrix::from_rows(&[[0.0], [2.5], [10.0]])).unwrap();
        for r in p.iter_rows() {
            assert!((r[0] - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn matches_hand_computed_posterior() {
        // class 0: {0, 2} mean 1 var 1; class 1: {4, 8} mean 6 var 4
        let x = Matrix::from_rows(&[[0.0], [2.0], [4.0], [8.0]]);
        let m = fit_gnb(&x, &[0, 0, 1, 1], 2, 1e-9).unwrap();
        let q = 3.0;
        let density = |mu: f64, var: f64| std::f64::consts::TAU.powf(-0.5) / var.sqrt() * (-(q - mu) * (q - mu) / (2.0 * var)).exp();
        let (a, b) = (0.5 * density(1.0, 1.0), 0.5 * density(6.0, 4.0));
        let p = m.predict_proba(&Matrix::from_rows(&[[q]])).unwrap();
        assert!((p[(0, 0)] - a / (a + b)).abs() < 1e-12);
        assert!((p[(0, 1)] - b / (a + b)).abs() < 1e-12);
    }

    #[test]
    fn duplicated_rows_fit_the_same_model() {
        let x = Matrix::from_rows(&[[0.1, 5.0], [2.3, 1.0], [4.0, -2.0], [8.5, 0.25], [1.7, 3.3]]);
        let y = [0, 0, 1, 1, 1];
        let doubled = Matrix::from_rows(&x.iter_rows().chain(x.iter_rows()).collect::<Vec<_>>());
        let y2: Vec<usize> = y.iter().chain(&y).copied().collect();
        let a = fit_gnb(&x, &y, 2, 1e-9).unwrap();
        let b = fit_gnb(&doubled, &y2, 2, 1e-9).unwrap();
        for (u, v) in a.to_params().arrays.iter().zip(b.to_params().arrays.iter()) {
            for (p, q) in u.data.iter().zip(&v.data) {
                assert!((p - q).abs() <= 1e-12 * p.abs().max(1.0));
            }
        }
    }

    #[test]
    fn row_order_invariant() {
        let x = Matrix::from_rows(&[[0.1, 5.0], [2.3, 1.0], [4.0, -2.0], [8.5, 0.25], [1.7, 3.3], [0.3, 0.7]]);
        let y = [0, 0, 1, 1, 1, 0];
        let perm = [5, 3, 0, 4, 1, 2];
        let xp = x.select_rows(&perm);
        let yp: Vec<usize> = perm.iter().map(|&i| y[i]).collect();
        assert_eq!(fit_gnb(&x, &y, 2, 1e-9).unwrap(), fit_gnb(&xp, &yp, 2, 1e-9).unwrap());
    }

    #[test]
    fn empty_class_is_an_error() {
        let x = Matrix::from_rows(&[[0.0], [1.0]]);
        assert!(fit_gnb(&x, &[0, 0], 2, 1e-9).is_err());
    }
}
