//! The experiment runner: preprocessing, fitting, evaluation, explanation
//! and the with/without-LDA comparison.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use credo_core::explain::feature_ranges;
use credo_core::frame::{
    drop_sparse_features, fit_encoder, fit_imputer, fit_scaler, split, ColumnKind, Frame,
};
use credo_core::lda::{fit_lda, LdaConfig};
use credo_core::metrics::{confusion, evaluate, h_measure, MetricReport, Severity};
use credo_core::resample::{smote, SmoteConfig};
use credo_core::Matrix;

use crate::archive::Archive;
use crate::config::{LdaSection, ModelSpec, PipelineConfig, SmotePlacement};
use crate::error::{CliError, Result, StageExt};
use crate::explanations;
use crate::io::load_csv;
use crate::models::{self, Fitted};
use crate::prep::Preprocessor;
use crate::report::{CompareTable, MetricsRecord, ModelReport, PrepSummary, RunReport, StageTime, WarningRecord};

struct Timer {
    last: Instant,
    laps: Vec<StageTime>,
}

impl Timer {
    fn new() -> Self {
        Timer { last: Instant::now(), laps: Vec::new() }
    }

    fn lap(&mut self, stage: &str) {
        let now = Instant::now();
        self.laps.push(StageTime { stage: stage.to_string(), ms: (now - self.last).as_secs_f64() * 1e3 });
        self.last = now;
    }
}

/// Training and test matrices plus the state that produced them.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub prep: Preprocessor,
    pub x_train: Matrix,
    pub y_train: Vec<usize>,
    pub x_test: Matrix,
    pub y_test: Vec<usize>,
    pub summary: PrepSummary,
    pub warnings: Vec<WarningRecord>,
    pub timing: Vec<StageTime>,
}

impl Prepared {
    pub fn n_classes(&self) -> usize {
        self.prep.class_names().len()
    }

    pub fn feature_names(&self) -> Vec<String> {
        self.prep.feature_names()
    }
}

fn class_counts(labels: &[usize], c: usize) -> Vec<usize> {
    let mut out = vec![0; c];
    for &l in labels {
        out[l] += 1;
    }
    out
}

fn matrices(f: &Frame) -> Result<(Matrix, Vec<usize>)> {
    Ok((f.feature_matrix()?, f.require_target()?.labels().to_vec()))
}

/// load → drop rows without a target → drop sparse columns → impute →
/// encode → split → scale → SMOTE, with SMOTE placement from the config.
pub fn prepare(cfg: &PipelineConfig) -> Result<Prepared> {
    let mut timer = Timer::new();
    let mut warnings = Vec::new();

    let mut hints: BTreeMap<String, ColumnKind> =
        cfg.schema_hints.iter().map(|(k, v)| (k.clone(), ColumnKind::from(*v))).collect();
    hints.insert(cfg.target.clone(), ColumnKind::Categorical);
    let raw = load_csv(&cfg.data, &hints).stage("load")?;
    let target_col = raw
        .column(&cfg.target)
        .ok_or_else(|| CliError::Data(format!("target column '{}' not found", cfg.target)))
        .stage("load")?;
    let labeled: Vec<usize> = (0..raw.n_rows()).filter(|&i| !target_col.is_missing(i)).collect();
    let rows_loaded = raw.n_rows();
    let rows_dropped = rows_loaded - labeled.len();
    let raw = if rows_dropped > 0 {
        warnings.push(WarningRecord {
            code: "rows_missing_target".into(),
            message: format!("{rows_dropped} rows without a '{}' value were dropped", cfg.target),
        });
        raw.select_rows(&labeled)
    } else {
        raw
    };
    let input_columns: Vec<String> = raw.names().iter().filter(|n| **n != cfg.target).cloned().collect();
    timer.lap("load");

    let filtered = drop_sparse_features(&raw, cfg.null_threshold).stage("drop_sparse")?;
    if filtered.n_cols() < 2 {
        return Err(CliError::Data("all features sparse".into())).stage("drop_sparse");
    }
    let columns_dropped: Vec<String> =
        input_columns.iter().filter(|n| filtered.position(n).is_none()).cloned().collect();
    let columns: Vec<(String, ColumnKind)> = filtered
        .names()
        .iter()
        .zip(filtered.columns())
        .filter(|(n, _)| **n != cfg.target)
        .map(|(n, c)| (n.clone(), c.kind()))
        .collect();
    timer.lap("drop_sparse");

    let mut imputer = fit_imputer(&filtered).stage("impute")?;
    imputer.fills.retain(|(n, _)| *n != cfg.target);
    let imputed = imputer.apply(&filtered).stage("impute")?;
    timer.lap("impute");

    let encoder = fit_encoder(&imputed, &cfg.target).stage("encode")?;
    let encoded = encoder.apply(&imputed).stage("encode")?;
    encoded.require_target().stage("encode")?;
    let n_classes = encoder.class_names.len();
    timer.lap("encode");

    let smote_cfg = SmoteConfig { k_neighbors: cfg.smote.k_neighbors, seed: cfg.smote.seed, target_count: None };
    let mode = cfg.scaler.into();
    let (train, test, scaler, before, after, path) = if cfg.smote.enabled && cfg.smote.placement == SmotePlacement::BeforeSplit {
        let scaler = fit_scaler(&encoded, mode).stage("scale")?;
        let scaled = scaler.apply(&encoded).stage("scale")?;
        timer.lap("scale");
        let before = class_counts(scaled.require_target()?.labels(), n_classes);
        let (balanced, w) = smote(&scaled, &smote_cfg).stage("smote")?;
        warnings.extend(w.iter().map(WarningRecord::from));
        let after = class_counts(balanced.require_target()?.labels(), n_classes);
        timer.lap("smote");
        let (train, test) = split(&balanced, cfg.split.train_fraction, cfg.split.seed).stage("split")?;
        timer.lap("split");
        (train, test, scaler, before, after, "before_split")
    } else {
        let (train, test) = split(&encoded, cfg.split.train_fraction, cfg.split.seed).stage("split")?;
        timer.lap("split");
        let scaler = fit_scaler(&train, mode).stage("scale")?;
        let (train, test) = (scaler.apply(&train).stage("scale")?, scaler.apply(&test).stage("scale")?);
        timer.lap("scale");
        let before = class_counts(train.require_target()?.labels(), n_classes);
        if cfg.smote.enabled {
            let (balanced, w) = smote(&train, &smote_cfg).stage("smote")?;
            warnings.extend(w.iter().map(WarningRecord::from));
            let after = class_counts(balanced.require_target()?.labels(), n_classes);
            timer.lap("smote");
            (balanced, test, scaler, before, after, "after_split")
        } else {
            let after = before.clone();
            (train, test, scaler, before, after, "disabled")
        }
    };
    let (x_train, y_train) = matrices(&train).stage("split")?;
    let (x_test, y_test) = matrices(&test).stage("split")?;

    let summary = PrepSummary {
        rows_loaded,
        rows_dropped_missing_target: rows_dropped,
        columns_loaded: input_columns.len(),
        columns_dropped,
        encoded_features: x_train.cols(),
        class_names: encoder.class_names.clone(),
        class_counts_before_smote: before,
        class_counts_after_smote: after,
        train_rows: x_train.rows(),
        test_rows: x_test.rows(),
        smote_path: path.to_string(),
    };
    let prep = Preprocessor {
        target: cfg.target.clone(),
        input_columns,
        columns,
        imputer,
        encoder,
        scaler,
        projection: None,
    };
    Ok(Prepared { prep, x_train, y_train, x_test, y_test, summary, warnings, timing: timer.laps })
}

/// Fits the discriminant projection on the training rows and maps both
/// splits onto it.
pub fn project(data: &Prepared, lda: &LdaSection) -> Result<Prepared> {
    let start = Instant::now();
    let cfg = LdaConfig { n_components: lda.n_components.unwrap_or(usize::MAX), ridge: lda.ridge };
    let p = fit_lda(&data.x_train, &data.y_train, data.n_classes(), &cfg).stage("lda")?;
    let mut out = data.clone();
    out.x_train = p.transform(&data.x_train).stage("lda")?;
    out.x_test = p.transform(&data.x_test).stage("lda")?;
    out.warnings.extend(p.warnings.iter().map(WarningRecord::from));
    out.prep.projection = Some(p);
    out.timing.push(StageTime { stage: "lda".into(), ms: start.elapsed().as_secs_f64() * 1e3 });
    Ok(out)
}

/// A fitted model with its test-set evaluation.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub fitted: Fitted,
    pub report: MetricReport,
    pub record: MetricsRecord,
    pub fit_ms: f64,
}

pub fn fit_and_evaluate(spec: &ModelSpec, data: &Prepared, metrics: &[String]) -> Result<Outcome> {
    let start = Instant::now();
    let fitted = models::fit(spec, &data.x_train, &data.y_train, data.n_classes()).stage("fit")?;
    let fit_ms = start.elapsed().as_secs_f64() * 1e3;
    let proba = fitted.model().predict_proba(&data.x_test).stage("evaluate")?;
    let report = evaluate(&data.y_test, &proba).stage("evaluate")?;
    let pred: Vec<usize> = proba.iter_rows().map(credo_core::math::argmax).collect();
    let cm = confusion(&data.y_test, &pred, data.n_classes()).stage("evaluate")?;
    let h = h_measure(&data.y_test, &proba, Severity::default()).stage("evaluate")?;
    let record = MetricsRecord::new(&report, &cm, &h.per_class, data.prep.class_names(), metrics);
    Ok(Outcome { fitted, report, record, fit_ms })
}

/// Files produced by a command, written together at the end.
#[derive(Debug, Default)]
pub struct Outputs {
    pub files: Vec<(PathBuf, Vec<u8>)>,
}

impl Outputs {
    pub fn add(&mut self, rel: impl Into<PathBuf>, bytes: Vec<u8>) {
        self.files.push((rel.into(), bytes));
    }

    /// Writes everything under `root`. On failure the files already
    /// written are removed.
    pub fn commit(&self, root: &Path) -> Result<()> {
        let mut written: Vec<PathBuf> = Vec::new();
        let result = (|| {
            for (rel, bytes) in &self.files {
                let path = root.join(rel);
                if let Some(dir) = path.parent() {
                    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
                }
                std::fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
                written.push(path);
            }
            Ok(())
        })();
        if result.is_err() {
            for p in &written {
                let _ = std::fs::remove_file(p);
            }
        }
        result
    }
}

/// Result of `credo run`.
#[derive(Debug)]
pub struct RunResult {
    pub report: RunReport,
    pub table: CompareTable,
    pub outputs: Outputs,
}

pub fn run(cfg: &PipelineConfig) -> Result<RunResult> {
    let total = Instant::now();
    let base = prepare(cfg)?;
    let data = if cfg.lda.enabled { project(&base, &cfg.lda)? } else { base };
    let mut timing = data.timing.clone();
    let warnings = data.warnings.clone();
    let features = data.feature_names();
    let classes = data.prep.class_names().to_vec();
    let mut outputs = Outputs::default();
    let mut table = CompareTable::new(&cfg.metrics);
    let mut results = Vec::new();
    let mut explanation_files = Vec::new();

    for spec in &cfg.models {
        let name = spec.name();
        let outcome = fit_and_evaluate(spec, &data, &cfg.metrics)?;
        timing.push(StageTime { stage: format!("fit:{name}"), ms: outcome.fit_ms });
        table.push(name, cfg.lda.enabled, Ok(&outcome.report));
        let archive = Archive { prep: data.prep.clone(), model: outcome.fitted.clone() };
        let dir = PathBuf::from("models").join(name);
        for (file, bytes) in archive.files() {
            outputs.add(dir.join(file), bytes);
        }

        let start = Instant::now();
        let model = outcome.fitted.model();
        for &row in &cfg.explain.lime_rows {
            let (_, files) =
                explanations::lime(name, model, &features, &classes, &data.x_train, &data.x_test, row, &cfg.explain.lime)
                    .stage("explain")?;
            explanation_files.extend(files);
        }
        if let Some(m) = &cfg.explain.morris {
            let (_, files) = explanations::morris(name, model, &features, &classes, &feature_ranges(&data.x_train), m)
                .stage("explain")?;
            explanation_files.extend(files);
        }
        if !cfg.explain.lime_rows.is_empty() || cfg.explain.morris.is_some() {
            timing.push(StageTime { stage: format!("explain:{name}"), ms: start.elapsed().as_secs_f64() * 1e3 });
        }

        results.push(ModelReport {
            model: name.to_string(),
            lda: cfg.lda.enabled,
            archive: Some(dir.to_string_lossy().into_owned()),
            metrics: Some(outcome.record),
            error: None,
            fit_ms: outcome.fit_ms,
        });
    }

    let mut explanation_paths = Vec::new();
    for (file, bytes) in explanation_files {
        let rel = PathBuf::from("explanations").join(&file);
        explanation_paths.push(rel.to_string_lossy().into_owned());
        outputs.add(rel, bytes);
    }
    outputs.add("metrics.csv", table.to_csv().into_bytes());
    timing.push(StageTime { stage: "total".into(), ms: total.elapsed().as_secs_f64() * 1e3 });
    let report = RunReport {
        command: "run".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config: cfg.clone(),
        preprocessing: data.summary.clone(),
        lda_components: data.prep.projection.as_ref().map(|p| p.n_components()),
        results,
        warnings,
        explanations: explanation_paths,
        timing_ms: timing,
    };
    outputs.add("report.json", serde_json::to_vec_pretty(&report).expect("report serializes"));
    Ok(RunResult { report, table, outputs })
}

/// Result of `credo compare`.
#[derive(Debug)]
pub struct CompareResult {
    pub report: RunReport,
    pub table: CompareTable,
    pub outputs: Outputs,
}

/// Every listed model with the projection off, then on. A failing cell is
/// recorded in the table and the rest keep running.
pub fn compare(cfg: &PipelineConfig) -> Result<CompareResult> {
    let total = Instant::now();
    let base = prepare(cfg)?;
    let mut timing = base.timing.clone();
    let mut warnings = base.warnings.clone();
    let projected = project(&base, &cfg.lda);
    let mut table = CompareTable::new(&cfg.metrics);
    let mut results = Vec::new();
    let mut lda_components = None;

    for lda in [false, true] {
        let data = match (lda, &projected) {
            (false, _) => &base,
            (true, Ok(p)) => {
                lda_components = p.prep.projection.as_ref().map(|p| p.n_components());
                warnings.extend(p.warnings[base.warnings.len()..].iter().cloned());
                timing.extend(p.timing[base.timing.len()..].iter().cloned());
                p
            }
            (true, Err(e)) => {
                for spec in &cfg.models {
                    table.push(spec.name(), true, Err(e.to_string()));
                    results.push(ModelReport {
                        model: spec.name().into(),
                        lda: true,
                        archive: None,
                        metrics: None,
                        error: Some(e.to_string()),
                        fit_ms: 0.0,
                    });
                }
                continue;
            }
        };
        let outcomes: Vec<Result<Outcome>> = std::thread::scope(|s| {
            let handles: Vec<_> =
                cfg.models.iter().map(|spec| s.spawn(move || fit_and_evaluate(spec, data, &cfg.metrics))).collect();
            handles.into_iter().map(|h| h.join().expect("model thread panicked")).collect()
        });
        for (spec, outcome) in cfg.models.iter().zip(outcomes) {
            let name = spec.name();
            match outcome {
                Ok(o) => {
                    table.push(name, lda, Ok(&o.report));
                    timing.push(StageTime { stage: format!("fit:{name}:lda={lda}"), ms: o.fit_ms });
                    results.push(ModelReport {
                        model: name.into(),
                        lda,
                        archive: None,
                        metrics: Some(o.record),
                        error: None,
                        fit_ms: o.fit_ms,
                    });
                }
                Err(e) => {
                    table.push(name, lda, Err(e.to_string()));
                    results.push(ModelReport { model: name.into(), lda, archive: None, metrics: None, error: Some(e.to_string()), fit_ms: 0.0 });
                }
            }
        }
    }

    timing.push(StageTime { stage: "total".into(), ms: total.elapsed().as_secs_f64() * 1e3 });
    let report = RunReport {
        command: "compare".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config: cfg.clone(),
        preprocessing: base.summary.clone(),
        lda_components,
        results,
        warnings,
        explanations: Vec::new(),
        timing_ms: timing,
    };
    let mut outputs = Outputs::default();
    outputs.add("compare.csv", table.to_csv().into_bytes());
    outputs.add("compare.md", table.to_markdown().into_bytes());
    outputs.add("report.json", serde_json::to_vec_pretty(&report).expect("report serializes"));
    Ok(CompareResult { report, table, outputs })
}

/// Options for `credo explain`.
#[derive(Debug, Clone)]
pub enum ExplainMethod {
    Lime { row: usize, params: crate::config::LimeParams },
    Morris(crate::config::MorrisParams),
}

/// Explains an archived model on a raw CSV. Returns the artifacts as
/// (file name, bytes).
pub fn explain_archive(archive_dir: &Path, data: &Path, method: &ExplainMethod) -> Result<Vec<explanations::Artifact>> {
    let archive = Archive::load(archive_dir).stage("load_archive")?;
    let hints: BTreeMap<String, ColumnKind> = archive.prep.columns.iter().cloned().collect();
    let raw = load_csv(data, &hints).stage("load")?;
    let x = archive.prep.transform(&raw).stage("transform")?;
    let features = archive.prep.feature_names();
    let classes = archive.prep.class_names().to_vec();
    let tag = archive.model.kind();
    let model = archive.model.model();
    let files = match method {
        ExplainMethod::Lime { row, params } => {
            explanations::lime(tag, model, &features, &classes, &x, &x, *row, params).stage("explain")?.1
        }
        ExplainMethod::Morris(params) => {
            explanations::morris(tag, model, &features, &classes, &feature_ranges(&x), params).stage("explain")?.1
        }
    };
    Ok(files)
}
