//! Numerical core of the credo credit-scoring pipeline.
//!
//! Everything here is `no_std` with `alloc`: the crate holds the tabular
//! data model and its preprocessing chain, SMOTE balancing, linear
//! discriminant analysis, the classifier family (logistic regression,
//! Gaussian naive Bayes, CART, random forest, second-order boosted trees,
//! multilayer perceptron and the boosted-trees-to-network hybrid), the
//! evaluation metrics and the two explainers (LIME and Morris screening).
//!
//! File formats, configuration and the command line live in the `credo`
//! crate, which layers IO on top of these pure functions.
//!
//! # Module Structure
//!
//! - [`frame`] - typed columns, null filtering, imputation, encoding, scaling, splitting
//! - [`resample`] - SMOTE oversampling
//! - [`lda`] - discriminant projection and Gaussian discriminant classifier
//! - [`baselines`] - logistic regression, naive Bayes, CART, random forest
//! - [`gbt`] - gradient-boosted trees with softmax objective
//! - [`neural`] - MLP and the hybrid boosted-trees/MLP model
//! - [`metrics`] - confusion matrix, macro metrics, H-measure
//! - [`explain`] - LIME surrogates, Morris elementary effects, rankings
//! - [`synth`] - synthetic lending-style dataset generator

#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod baselines;
pub mod error;
pub mod explain;
pub mod frame;
pub mod gbt;
pub mod lda;
pub mod linalg;
pub mod math;
pub mod metrics;
pub mod model;
pub mod neural;
pub mod params;
pub mod resample;
pub mod synth;

pub use error::{Error, Result, Warning};
pub use linalg::Matrix;
pub use model::Model;
