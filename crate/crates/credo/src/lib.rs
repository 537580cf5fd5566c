//! IO, configuration and the experiment runner behind the `credo` binary.
//!
//! The numerical work lives in [`credo_core`]; this crate reads CSVs,
//! validates JSON configs, writes model archives and reports, and wires
//! the preprocessing chain to the classifiers and explainers.

pub mod archive;
pub mod config;
pub mod error;
pub mod explanations;
pub mod io;
pub mod models;
pub mod pipeline;
pub mod prep;
pub mod report;

pub use error::{CliError, Result};
