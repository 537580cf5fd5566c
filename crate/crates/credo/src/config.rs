//! JSON pipeline configuration.
//!
//! Every section has defaults, unknown keys are rejected, and errors carry
//! the JSON path of the offending field. The resolved config (defaults
//! filled in) is echoed verbatim into every run report.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use credo_core::baselines::{Criterion, ForestConfig, LogRegConfig, TreeConfig};
use credo_core::explain::{LimeConfig, MorrisConfig};
use credo_core::frame::{ColumnKind, ScalerMode};
use credo_core::gbt::GbtConfig;
use credo_core::neural::{FeatureMode, MlpConfig};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const MODEL_NAMES: [&str; 8] = ["logreg", "gnb", "tree", "forest", "gbt", "mlp", "lda", "xgdnn"];
pub const METRIC_NAMES: [&str; 6] = ["accuracy", "sensitivity", "specificity", "g_mean", "f1", "h_measure"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    /// CSV path, relative to the config file.
    pub data: PathBuf,
    #[serde(default = "default_target")]
    pub target: String,
    #[serde(default = "default_null_threshold")]
    pub null_threshold: f64,
    #[serde(default)]
    pub schema_hints: BTreeMap<String, KindHint>,
    #[serde(default)]
    pub scaler: ScalerChoice,
    #[serde(default)]
    pub smote: SmoteSection,
    #[serde(default)]
    pub split: SplitSection,
    #[serde(default)]
    pub lda: LdaSection,
    pub models: Vec<ModelSpec>,
    #[serde(default = "default_metrics")]
    pub metrics: Vec<String>,
    #[serde(default)]
    pub explain: ExplainSection,
    /// Output directory, relative to the config file.
    #[serde(default = "default_output")]
    pub output: PathBuf,
}

fn default_target() -> String {
    credo_core::synth::TARGET.to_string()
}

fn default_null_threshold() -> f64 {
    0.5
}

fn default_metrics() -> Vec<String> {
    METRIC_NAMES.iter().map(|s| s.to_string()).collect()
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KindHint {
    Numeric,
    Categorical,
}

impl From<KindHint> for ColumnKind {
    fn from(k: KindHint) -> Self {
        match k {
            KindHint::Numeric => ColumnKind::Numeric,
            KindHint::Categorical => ColumnKind::Categorical,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalerChoice {
    #[default]
    Zscore,
    Minmax,
}

impl From<ScalerChoice> for ScalerMode {
    fn from(s: ScalerChoice) -> Self {
        match s {
            ScalerChoice::Zscore => ScalerMode::ZScore,
            ScalerChoice::Minmax => ScalerMode::MinMax,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SmotePlacement {
    #[default]
    AfterSplit,
    BeforeSplit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SmoteSection {
    pub enabled: bool,
    pub placement: SmotePlacement,
    pub k_neighbors: usize,
    pub seed: u64,
}

impl Default for SmoteSection {
    fn default() -> Self {
        SmoteSection { enabled: true, placement: SmotePlacement::AfterSplit, k_neighbors: 5, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSection {
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for SplitSection {
    fn default() -> Self {
        SplitSection { train_fraction: 0.8, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LdaSection {
    pub enabled: bool,
    /// `None` keeps the maximum, `C - 1`.
    pub n_components: Option<usize>,
    pub ridge: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    Logreg(LogRegParams),
    Gnb(GnbParams),
    Tree(TreeParams),
    Forest(ForestParams),
    Gbt(GbtParams),
    Mlp(MlpParams),
    Lda(LdaParams),
    Xgdnn(XgdnnParams),
}

impl ModelSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ModelSpec::Logreg(_) => "logreg",
            ModelSpec::Gnb(_) => "gnb",
            ModelSpec::Tree(_) => "tree",
            ModelSpec::Forest(_) => "forest",
            ModelSpec::Gbt(_) => "gbt",
            ModelSpec::Mlp(_) => "mlp",
            ModelSpec::Lda(_) => "lda",
            ModelSpec::Xgdnn(_) => "xgdnn",
        }
    }

    /// Default hyperparameters for a model name.
    pub fn default_for(name: &str) -> Option<ModelSpec> {
        Some(match name {
            "logreg" => ModelSpec::Logreg(LogRegParams::default()),
            "gnb" => ModelSpec::Gnb(GnbParams::default()),
            "tree" => ModelSpec::Tree(TreeParams::default()),
            "forest" => ModelSpec::Forest(ForestParams::default()),
            "gbt" => ModelSpec::Gbt(GbtParams::default()),
            "mlp" => ModelSpec::Mlp(MlpParams::default()),
            "lda" => ModelSpec::Lda(LdaParams::default()),
            "xgdnn" => ModelSpec::Xgdnn(XgdnnParams::default()),
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LogRegParams {
    pub l2: f64,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for LogRegParams {
    fn default() -> Self {
        let c = LogRegConfig::default();
        LogRegParams { l2: c.l2, max_iter: c.max_iter, tol: c.tol }
    }
}

impl From<&LogRegParams> for LogRegConfig {
    fn from(p: &LogRegParams) -> Self {
        LogRegConfig { l2: p.l2, max_iter: p.max_iter, tol: p.tol }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GnbParams {
    pub var_smoothing: f64,
}

impl Default for GnbParams {
    fn default() -> Self {
        GnbParams { var_smoothing: 1e-9 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CriterionChoice {
    #[default]
    Gini,
    Entropy,
}

impl From<CriterionChoice> for Criterion {
    fn from(c: CriterionChoice) -> Self {
        match c {
            CriterionChoice::Gini => Criterion::Gini,
            CriterionChoice::Entropy => Criterion::Entropy,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_leaf: usize,
    pub criterion: CriterionChoice,
}

impl Default for TreeParams {
    fn default() -> Self {
        let c = TreeConfig::default();
        TreeParams { max_depth: c.max_depth, min_leaf: c.min_leaf, criterion: CriterionChoice::Gini }
    }
}

impl From<&TreeParams> for TreeConfig {
    fn from(p: &TreeParams) -> Self {
        TreeConfig { max_depth: p.max_depth, min_leaf: p.min_leaf, criterion: p.criterion.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    pub criterion: CriterionChoice,
    /// Features tried per split; `None` means `round(sqrt(d))`.
    pub mtry: Option<usize>,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        let c = ForestConfig::default();
        ForestParams {
            n_trees: c.n_trees,
            max_depth: c.tree.max_depth,
            min_leaf: c.tree.min_leaf,
            criterion: CriterionChoice::Gini,
            mtry: c.mtry,
            bootstrap: c.bootstrap,
            seed: c.seed,
        }
    }
}

impl From<&ForestParams> for ForestConfig {
    fn from(p: &ForestParams) -> Self {
        ForestConfig {
            n_trees: p.n_trees,
            tree: TreeConfig { max_depth: p.max_depth, min_leaf: p.min_leaf, criterion: p.criterion.into() },
            mtry: p.mtry,
            bootstrap: p.bootstrap,
            seed: p.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GbtParams {
    pub rounds: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub lambda: f64,
    pub gamma: f64,
    pub min_child_weight: f64,
    pub seed: u64,
}

impl Default for GbtParams {
    fn default() -> Self {
        let c = GbtConfig::default();
        GbtParams {
            rounds: c.rounds,
            learning_rate: c.learning_rate,
            max_depth: c.max_depth,
            lambda: c.lambda,
            gamma: c.gamma,
            min_child_weight: c.min_child_weight,
            seed: c.seed,
        }
    }
}

impl From<&GbtParams> for GbtConfig {
    fn from(p: &GbtParams) -> Self {
        GbtConfig {
            rounds: p.rounds,
            learning_rate: p.learning_rate,
            max_depth: p.max_depth,
            lambda: p.lambda,
            gamma: p.gamma,
            min_child_weight: p.min_child_weight,
            seed: p.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MlpParams {
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for MlpParams {
    fn default() -> Self {
        let c = MlpConfig::default();
        MlpParams { hidden: c.hidden, epochs: c.epochs, batch_size: c.batch_size, learning_rate: c.learning_rate, seed: c.seed }
    }
}

impl From<&MlpParams> for MlpConfig {
    fn from(p: &MlpParams) -> Self {
        MlpConfig {
            hidden: p.hidden.clone(),
            epochs: p.epochs,
            batch_size: p.batch_size,
            learning_rate: p.learning_rate,
            seed: p.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LdaParams {
    pub ridge: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HybridFeatures {
    #[default]
    Margins,
    LeafOnehot,
    MarginsPlusRaw,
}

impl From<HybridFeatures> for FeatureMode {
    fn from(h: HybridFeatures) -> Self {
        match h {
            HybridFeatures::Margins => FeatureMode::Margins,
            HybridFeatures::LeafOnehot => FeatureMode::LeafOnehot,
            HybridFeatures::MarginsPlusRaw => FeatureMode::MarginsPlusRaw,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct XgdnnParams {
    pub features: HybridFeatures,
    pub gbt: GbtParams,
    pub mlp: MlpParams,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExplainSection {
    /// Test-split row indices to explain with LIME.
    pub lime_rows: Vec<usize>,
    pub lime: LimeParams,
    pub morris: Option<MorrisParams>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LimeParams {
    pub n_samples: usize,
    pub kernel_width: Option<f64>,
    pub n_features: usize,
    pub seed: u64,
}

impl Default for LimeParams {
    fn default() -> Self {
        let c = LimeConfig::default();
        LimeParams { n_samples: c.n_samples, kernel_width: c.kernel_width, n_features: c.n_features, seed: c.seed }
    }
}

impl From<&LimeParams> for LimeConfig {
    fn from(p: &LimeParams) -> Self {
        LimeConfig { n_samples: p.n_samples, kernel_width: p.kernel_width, n_features: p.n_features, seed: p.seed }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MorrisParams {
    pub trajectories: usize,
    pub levels: usize,
    pub delta: Option<f64>,
    pub seed: u64,
    /// Class whose probability is screened; `None` screens the class
    /// predicted at the center of the ranges.
    pub class: Option<usize>,
}

impl Default for MorrisParams {
    fn default() -> Self {
        let c = MorrisConfig::default();
        MorrisParams { trajectories: c.trajectories, levels: c.levels, delta: c.delta, seed: c.seed, class: None }
    }
}

impl From<&MorrisParams> for MorrisConfig {
    fn from(p: &MorrisParams) -> Self {
        MorrisConfig { trajectories: p.trajectories, levels: p.levels, delta: p.delta, seed: p.seed }
    }
}

impl PipelineConfig {
    /// Parses and validates. Paths stay as written; see [`Self::resolve_paths`].
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: PipelineConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            CliError::Config(format!("at '{path}': {}", e.into_inner()))
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        cfg.resolve_paths(path.parent().unwrap_or(Path::new(".")));
        Ok(cfg)
    }

    /// Makes relative data and output paths relative to `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        if self.data.is_relative() {
            self.data = base.join(&self.data);
        }
        if self.output.is_relative() {
            self.output = base.join(&self.output);
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(CliError::Config(m));
        if !(self.null_threshold > 0.0 && self.null_threshold <= 1.0) {
            return fail(format!("null_threshold {} outside (0, 1]", self.null_threshold));
        }
        if !(self.split.train_fraction > 0.0 && self.split.train_fraction < 1.0) {
            return fail(format!("split.train_fraction {} outside (0, 1)", self.split.train_fraction));
        }
        if self.smote.k_neighbors == 0 {
            return fail("smote.k_neighbors must be at least 1".into());
        }
        if self.lda.n_components == Some(0) {
            return fail("lda.n_components must be at least 1".into());
        }
        if self.models.is_empty() {
            return fail("models: at least one model is required".into());
        }
        for (i, m) in self.models.iter().enumerate() {
            if self.models[..i].iter().any(|o| o.name() == m.name()) {
                return fail(format!("models[{i}]: '{}' is listed twice", m.name()));
            }
        }
        if self.metrics.is_empty() {
            return fail("metrics: at least one metric is required".into());
        }
        for (i, m) in self.metrics.iter().enumerate() {
            if !METRIC_NAMES.contains(&m.as_str()) {
                return fail(format!("metrics[{i}]: unknown metric '{m}', expected one of {}", METRIC_NAMES.join(", ")));
            }
        }
        if self.explain.lime.n_samples < 2 {
            return fail("explain.lime.n_samples must be at least 2".into());
        }
        if let Some(m) = &self.explain.morris {
            if m.trajectories < 2 || m.levels < 2 {
                return fail("explain.morris needs at least 2 trajectories and 2 levels".into());
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = PipelineConfig::from_json(r#"{"data": "d.csv", "models": [{"name": "gbt"}]}"#).unwrap();
        assert_eq!(c.null_threshold, 0.5);
        assert_eq!(c.split.train_fraction, 0.8);
        assert!(c.smote.enabled);
        assert_eq!(c.smote.placement, SmotePlacement::AfterSplit);
        assert_eq!(c.scaler, ScalerChoice::Zscore);
        assert_eq!(c.metrics.len(), 6);
        assert_eq!(c.models[0], ModelSpec::Gbt(GbtParams::default()));
    }

    #[test]
    fn echo_round_trips() {
        let c = PipelineConfig::from_json(
            r#"{"data": "d.csv", "models": [{"name": "xgdnn", "gbt": {"rounds": 5}}, {"name": "forest", "mtry": 3}],
                "lda": {"enabled": true, "n_components": 21}}"#,
        )
        .unwrap();
        assert_eq!(PipelineConfig::from_json(&c.to_json()).unwrap(), c);
    }

    #[test]
    fn unknown_model_is_rejected_with_path() {
        let e = PipelineConfig::from_json(r#"{"data": "d.csv", "models": [{"name": "gbt"}, {"name": "svm"}]}"#)
            .unwrap_err();
        assert_eq!(e.exit_code(), 2);
        let msg = e.to_string();
        assert!(msg.contains("models[1]") && msg.contains("svm"), "{msg}");
    }

    #[test]
    fn unknown_fields_are_rejected() {
        for bad in [
            r#"{"data": "d.csv", "models": [{"name": "gbt"}], "colour": 1}"#,
            r#"{"data": "d.csv", "models": [{"name": "gbt", "depth": 3}]}"#,
            r#"{"data": "d.csv", "models": [{"name": "gbt"}], "smote": {"k": 3}}"#,
        ] {
            assert!(PipelineConfig::from_json(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn semantic_checks() {
        for bad in [
            r#"{"data": "d.csv", "models": []}"#,
            r#"{"data": "d.csv", "models": [{"name": "gbt"}, {"name": "gbt"}]}"#,
            r#"{"data": "d.csv", "models": [{"name": "gbt"}], "metrics": ["auc"]}"#,
            r#"{"data": "d.csv", "models": [{"name": "gbt"}], "null_threshold": 0}"#,
            r#"{"data": "d.csv", "models": [{"name": "gbt"}], "split": {"train_fraction": 1.0}}"#,
        ] {
            assert_eq!(PipelineConfig::from_json(bad).unwrap_err().exit_code(), 2, "{bad}");
        }
    }

    #[test]
    fn all_eight_names_parse() {
        for name in MODEL_NAMES {
            let spec = ModelSpec::default_for(name).unwrap();
            assert_eq!(spec.name(), name);
            let text = format!(r#"{{"data": "d.csv", "models": [{{"name": "{name}"}}]}}"#);
            assert_eq!(PipelineConfig::from_json(&text).unwrap().models[0], spec);
        }
        assert!(ModelSpec::default_for("svm").is_none());
    }
}
