//! Flat named parameter arrays. Every fitted model can be lowered to a
//! [`ParamSet`] and rebuilt from one; the CLI writes these as
//! little-endian binary blobs with a JSON shape index.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::Matrix;

#[derive(Debug, Clone, PartialEq)]
pub struct ParamArray {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamSet {
    pub arrays: Vec<ParamArray>,
}

impl ParamSet {
    pub fn new() -> Self {
        ParamSet::default()
    }

    pub fn push(&mut self, name: impl Into<String>, shape: Vec<usize>, data: Vec<f64>) {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        self.arrays.push(ParamArray { name: name.into(), shape, data });
    }

    pub fn push_scalar(&mut self, name: &str, value: f64) {
        self.push(name, Vec::from([1]), Vec::from([value]));
    }

    pub fn push_vec(&mut self, name: &str, v: &[f64]) {
        self.push(name, Vec::from([v.len()]), v.to_vec());
    }

    pub fn push_matrix(&mut self, name: &str, m: &Matrix) {
        self.push(name, Vec::from([m.rows(), m.cols()]), m.as_slice().to_vec());
    }

    /// Appends every array of `other` under `prefix.`.
    pub fn extend_prefixed(&mut self, prefix: &str, other: ParamSet) {
        for a in other.arrays {
            self.arrays.push(ParamArray { name: format!("{prefix}.{}", a.name), ..a });
        }
    }

    /// Arrays under `prefix.` with the prefix stripped.
    pub fn sub(&self, prefix: &str) -> ParamSet {
        let p = format!("{prefix}.");
        ParamSet {
            arrays: self
                .arrays
                .iter()
                .filter_map(|a| {
                    a.name.strip_prefix(&p).map(|rest| ParamArray { name: rest.to_string(), ..a.clone() })
                })
                .collect(),
        }
    }

    pub fn get(&self, name: &str) -> Result<&ParamArray> {
        self.arrays
            .iter()
            .find(|a| a.name == name)
            .ok_or_else(|| Error::data(format!("missing parameter array '{name}'")))
    }

    pub fn scalar(&self, name: &str) -> Result<f64> {
        let a = self.get(name)?;
        a.data.first().copied().ok_or_else(|| Error::data(format!("empty parameter '{name}'")))
    }

    pub fn count(&self, name: &str) -> Result<usize> {
        let v = self.scalar(name)?;
        if v < 0.0 || libm::trunc(v) != v {
            return Err(Error::data(format!("parameter '{name}' is not a count")));
        }
        Ok(v as usize)
    }

    pub fn vector(&self, name: &str) -> Result<Vec<f64>> {
        Ok(self.get(name)?.data.clone())
    }

    pub fn matrix(&self, name: &str) -> Result<Matrix> {
        let a = self.get(name)?;
        match a.shape.as_slice() {
            [r, c] => Matrix::from_vec(*r, *c, a.data.clone()),
            _ => Err(Error::data(format!("parameter '{name}' is not a matrix"))),
        }
    }
}

/// Lowering to and from a [`ParamSet`].
pub trait Persist: Sized {
    /// Stable type tag written to archive manifests.
    const KIND: &'static str;

    fn to_params(&self) -> ParamSet;

    fn from_params(p: &ParamSet) -> Result<Self>;
}
