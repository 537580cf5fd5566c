//! The classifier contract shared by every fitted model.

use alloc::boxed::Box;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::math;

/// A fitted classifier producing class probabilities for feature rows.
///
/// `predict_proba` must return a row-stochastic matrix with one column per
/// class. `predict` takes the argmax with ties going to the smallest class
/// index.
pub trait Model {
    fn n_classes(&self) -> usize;

    fn n_features(&self) -> usize;

    fn predict_proba(&self, x: &Matrix) -> Result<Matrix>;

    fn predict(&self, x: &Matrix) -> Result<Vec<usize>> {
        let p = self.predict_proba(x)?;
        Ok(p.iter_rows().map(math::argmax).collect())
    }
}

impl<M: Model + ?Sized> Model for &M {
    fn n_classes(&self) -> usize {
        (**self).n_classes()
    }
    fn n_features(&self) -> usize {
        (**self).n_features()
    }
    fn predict_proba(&self, x: &Matrix) -> Result<Matrix> {
        (**self).predict_proba(x)
    }
}

impl<M: Model + ?Sized> Model for Box<M> {
    fn n_classes(&self) -> usize {
        (**self).n_classes()
    }
    fn n_features(&self) -> usize {
        (**self).n_features()
    }
    fn predict_proba(&self, x: &Matrix) -> Result<Matrix> {
        (**self).predict_proba(x)
    }
}

pub(crate) fn check_width(x: &Matrix, expected: usize) -> Result<()> {
    if x.cols() != expected {
        return Err(Error::Dimension { expected, got: x.cols() });
    }
    Ok(())
}

/// Wraps a per-row closure as a [`Model`]. Handy for black-box explainers
/// and tests.
pub struct FnModel<F> {
    n_features: usize,
    n_classes: usize,
    f: F,
}

impl<F> FnModel<F>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    pub fn new(n_features: usize, n_classes: usize, f: F) -> Self {
        FnModel { n_features, n_classes, f }
    }
}

impl<F> Model for FnModel<F>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
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
            let p = (self.f)(row);
            if p.len() != self.n_classes {
                return Err(Error::Dimension { expected: self.n_classes, got: p.len() });
            }
            out.row_mut(i).copy_from_slice(&p);
        }
        Ok(out)
    }
}
