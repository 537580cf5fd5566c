//! Multilayer perceptron and the boosted-trees-to-network hybrid.

mod hybrid;
mod mlp;

pub use hybrid::{derive_features, fit_hybrid, predict_hybrid, FeatureMode, HybridXgDnn};
pub use mlp::{fit_mlp, predict_mlp, Adam, Layer, Mlp, MlpConfig};
