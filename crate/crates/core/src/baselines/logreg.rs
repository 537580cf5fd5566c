use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::math;
use crate::model::{check_width, Model};
use crate::params::{ParamSet, Persist};

#[derive(Debug, Clone, PartialEq)]
pub struct LogRegConfig {
    pub l2: f64,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for LogRegConfig {
    fn default() -> Self {
        LogRegConfig { l2: 1e-4, max_iter: 200, tol: 1e-6 }
    }
}

/// Multinomial softmax regression.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticRegression {
    /// C × d
    pub weights: Matrix,
    pub bias: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Objective value after every accepted step, starting at the initial point.
    pub loss_history: Vec<f64>,
}

impl LogisticRegression {
    /// All-zero parameters: uniform probabilities.
    pub fn zeros(n_features: usize, n_classes: usize) -> Self {
        LogisticRegression {
            weights: Matrix::zeros(n_classes, n_features),
            bias: vec![0.0; n_classes],
            iterations: 0,
            converged: false,
            loss_history: Vec::new(),
        }
    }

    fn logits(&self, row: &[f64], out: &mut [f64]) {
        for (c, o) in out.iter_mut().enumerate() {
            *o = self.bias[c] + crate::linalg::dot(self.weights.row(c), row);
        }
    }

    /// Mean cross-entropy plus `l2/2 · ‖W‖²`, and its gradient with
    /// respect to `(W, b)`.
    pub fn loss_and_gradient(&self, x: &Matrix, y: &[usize], l2: f64) -> (f64, Matrix, Vec<f64>) {
        let (n, c) = (x.rows(), self.bias.len());
        let mut gw = Matrix::zeros(c, x.cols());
        let mut gb = vec![0.0; c];
        let mut p = vec![0.0; c];
        let mut loss = 0.0;
        for (row, &label) in x.iter_rows().zip(y) {
            self.logits(row, &mut p);
            let max = p.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + math::ln(p.iter().map(|z| math::exp(z - max)).sum::<f64>());
            loss += lse - p[label];
            for k in 0..c {
                let r = math::exp(p[k] - lse) - if k == label { 1.0 } else { 0.0 };
                gb[k] += r;
                if r != 0.0 {
                    for (g, v) in gw.row_mut(k).iter_mut().zip(row) {
                        *g += r * v;
                    }
                }
            }
        }
        let inv_n = 1.0 / n as f64;
        loss *= inv_n;
        gw.scale(inv_n);
        gb.iter_mut().for_each(|g| *g *= inv_n);
        let penalty: f64 = self.weights.as_slice().iter().map(|w| w * w).sum();
        loss += 0.5 * l2 * penalty;
        let mut gw_data = gw.into_vec();
        for (g, &w) in gw_data.iter_mut().zip(self.weights.as_slice()) {
            *g += l2 * w;
        }
        let gw = Matrix::from_vec(c, x.cols(), gw_data).unwrap();
        (loss, gw, gb)
    }

    fn stepped(&self, gw: &Matrix, gb: &[f64], t: f64) -> LogisticRegression {
        let mut next = self.clone();
        let w: Vec<f64> = self.weights.as_slice().iter().zip(gw.as_slice()).map(|(w, g)| w - t * g).collect();
        next.weights = Matrix::from_vec(gw.rows(), gw.cols(), w).unwrap();
        next.bias = self.bias.iter().zip(gb).map(|(b, g)| b - t * g).collect();
        next
    }
}

/// Full-batch gradient descent with Armijo backtracking.
pub fn fit_logreg(x: &Matrix, y: &[usize], n_classes: usize, cfg: &LogRegConfig) -> Result<LogisticRegression> {
    if y.len() != x.rows() {
        return Err(Error::Dimension { expected: x.rows(), got: y.len() });
    }
    if x.rows() == 0 {
        return Err(Error::data("no training rows"));
    }
    if let Some(&l) = y.iter().find(|&&l| l >= n_classes) {
        return Err(Error::data(format!("label {l} out of range")));
    }
    let mut model = LogisticRegression::zeros(x.cols(), n_classes);
    let (mut loss, mut gw, mut gb) = model.loss_and_gradient(x, y, cfg.l2);
    model.loss_history.push(loss);
    let mut step = 1.0;
    for iter in 0..cfg.max_iter {
        let gmax = gw.as_slice().iter().chain(&gb).fold(0.0f64, |m, g| m.max(g.abs()));
        if gmax < cfg.tol {
            model.converged = true;
            break;
        }
        let gnorm2: f64 = gw.as_slice().iter().chain(&gb).map(|g| g * g).sum();
        step *= 2.0;
        loop {
            let trial = model.stepped(&gw, &gb, step);
            let (tl, tgw, tgb) = trial.loss_and_gradient(x, y, cfg.l2);
            if !tl.is_finite() {
                if step < 1e-30 {
                    return Err(Error::numeric(format!("non-finite loss at iteration {iter}")));
                }
                step *= 0.5;
                continue;
            }
            if tl <= loss - 0.5 * step * gnorm2 {
                model.weights = trial.weights;
                model.bias = trial.bias;
                loss = tl;
                gw = tgw;
                gb = tgb;
                model.loss_history.push(loss);
                break;
            }
            step *= 0.5;
            if step < 1e-30 {
                // No descent possible at machine precision; treat as converged.
                model.iterations = iter;
                model.converged = true;
                return Ok(model);
            }
        }
        model.iterations = iter + 1;
    }
    if !loss.is_finite() {
        return Err(Error::numeric(format!("non-finite loss at iteration {}", model.iterations)));
    }
    Ok(model)
}

impl Model for LogisticRegression {
    fn n_classes(&self) -> usize {
        self.bias.len()
    }

    fn n_features(&self) -> usize {
        self.weights.cols()
    }

    fn predict_proba(&self, x: &Matrix) -> Result<Matrix> {
        check_width(x, self.n_features())?;
        let mut out = Matrix::zeros(x.rows(), self.n_classes());
        for (i, row) in x.iter_rows().enumerate() {
            let o = out.row_mut(i);
            self.logits(row, o);
            math::softmax_in_place(o);
        }
        Ok(out)
    }
}

impl Persist for LogisticRegression {
    const KIND: &'static str = "logreg";

    fn to_params(&self) -> ParamSet {
        let mut p = ParamSet::new();
        p.push_matrix("weights", &self.weights);
        p.push_vec("bias", &self.bias);
        p
    }

    fn from_params(p: &ParamSet) -> Result<Self> {
        let weights = p.matrix("weights")?;
        let bias = p.vector("bias")?;
        if bias.len() != weights.rows() {
            return Err(Error::Dimension { expected: weights.rows(), got: bias.len() });
        }
        Ok(LogisticRegression { weights, bias, iterations: 0, converged: true, loss_history: Vec::new() })
    }
}
