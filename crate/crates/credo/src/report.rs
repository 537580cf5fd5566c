//! Report records, the metrics CSV and the comparison table.

use std::collections::BTreeMap;

use credo_core::metrics::{ConfusionMatrix, MetricReport};
use credo_core::Warning;
use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WarningRecord {
    pub code: String,
    pub message: String,
}

impl From<&Warning> for WarningRecord {
    fn from(w: &Warning) -> Self {
        WarningRecord { code: w.code.to_string(), message: w.message.clone() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageTime {
    pub stage: String,
    pub ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrepSummary {
    pub rows_loaded: usize,
    pub rows_dropped_missing_target: usize,
    pub columns_loaded: usize,
    pub columns_dropped: Vec<String>,
    pub encoded_features: usize,
    pub class_names: Vec<String>,
    /// Class counts of the rows SMOTE saw, before and after balancing.
    pub class_counts_before_smote: Vec<usize>,
    pub class_counts_after_smote: Vec<usize>,
    pub train_rows: usize,
    pub test_rows: usize,
    /// `after_split`, `before_split` or `disabled`.
    pub smote_path: String,
}

pub fn metric_value(r: &MetricReport, name: &str) -> Option<f64> {
    match name {
        "accuracy" => Some(r.accuracy),
        "sensitivity" => Some(r.sensitivity),
        "specificity" => Some(r.specificity),
        "g_mean" => Some(r.g_mean),
        "f1" => Some(r.f1),
        "h_measure" => r.h_measure,
        _ => None,
    }
}

/// Percentage rounded to two decimals, as the result tables print it.
pub fn percent(v: f64) -> f64 {
    (v * 10_000.0).round() / 100.0
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassRecord {
    pub class: String,
    pub support: u64,
    pub sensitivity: f64,
    pub specificity: f64,
    pub f1: f64,
    pub h_measure: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsRecord {
    pub values: BTreeMap<String, Option<f64>>,
    pub percent: BTreeMap<String, Option<f64>>,
    pub averaging: String,
    pub per_class: Vec<ClassRecord>,
    pub confusion: Vec<Vec<u64>>,
    pub conventions: Vec<String>,
    pub h_measure_skipped_classes: Vec<String>,
}

impl MetricsRecord {
    pub fn new(r: &MetricReport, cm: &ConfusionMatrix, h_per_class: &[Option<f64>], names: &[String], metrics: &[String]) -> Self {
        let values: BTreeMap<String, Option<f64>> = metrics.iter().map(|m| (m.clone(), metric_value(r, m))).collect();
        let percent = values.iter().map(|(k, v)| (k.clone(), v.map(percent))).collect();
        MetricsRecord {
            values,
            percent,
            averaging: r.averaging.to_string(),
            per_class: r
                .per_class
                .iter()
                .enumerate()
                .map(|(c, m)| ClassRecord {
                    class: names[c].clone(),
                    support: m.support,
                    sensitivity: m.sensitivity,
                    specificity: m.specificity,
                    f1: m.f1,
                    h_measure: h_per_class.get(c).copied().flatten(),
                })
                .collect(),
            confusion: cm.rows(),
            conventions: r.conventions.clone(),
            h_measure_skipped_classes: r.h_skipped.iter().map(|&c| names[c].clone()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelReport {
    pub model: String,
    pub lda: bool,
    pub archive: Option<String>,
    pub metrics: Option<MetricsRecord>,
    pub error: Option<String>,
    pub fit_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub command: String,
    pub version: String,
    pub config: PipelineConfig,
    pub preprocessing: PrepSummary,
    pub lda_components: Option<usize>,
    pub results: Vec<ModelReport>,
    pub warnings: Vec<WarningRecord>,
    pub explanations: Vec<String>,
    pub timing_ms: Vec<StageTime>,
}

/// Rows of metric values keyed by model and LDA setting. Serves as both
/// the run's `metrics.csv` and the comparison matrix.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CompareTable {
    pub metrics: Vec<String>,
    pub rows: Vec<CompareRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareRow {
    pub model: String,
    pub lda: bool,
    pub values: Vec<Option<f64>>,
    pub error: Option<String>,
}

impl CompareTable {
    pub fn new(metrics: &[String]) -> Self {
        CompareTable { metrics: metrics.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, model: &str, lda: bool, outcome: std::result::Result<&MetricReport, String>) {
        let (values, error) = match outcome {
            Ok(r) => (self.metrics.iter().map(|m| metric_value(r, m)).collect(), None),
            Err(e) => (vec![None; self.metrics.len()], Some(e)),
        };
        self.rows.push(CompareRow { model: model.to_string(), lda, values, error });
    }

    /// Full-precision CSV; parses back to an identical table.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["model".to_string(), "lda".to_string()];
        header.extend(self.metrics.iter().cloned());
        header.push("error".into());
        w.write_record(&header).expect("in-memory write");
        for r in &self.rows {
            let mut rec = vec![r.model.clone(), r.lda.to_string()];
            rec.extend(r.values.iter().map(|v| v.map(|x| format!("{x}")).unwrap_or_default()));
            rec.push(r.error.clone().unwrap_or_default());
            w.write_record(&rec).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv")
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let bad = |m: String| CliError::Data(format!("comparison table: {m}"));
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        let header: Vec<String> = rdr.headers().map_err(|e| bad(e.to_string()))?.iter().map(str::to_string).collect();
        if header.len() < 3 || header[0] != "model" || header[1] != "lda" || header[header.len() - 1] != "error" {
            return Err(bad("unexpected header".into()));
        }
        let metrics = header[2..header.len() - 1].to_vec();
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| bad(e.to_string()))?;
            let lda = rec[1].parse::<bool>().map_err(|e| bad(e.to_string()))?;
            let values = (0..metrics.len())
                .map(|j| match &rec[2 + j] {
                    "" => Ok(None),
                    s => s.parse::<f64>().map(Some).map_err(|e| bad(e.to_string())),
                })
                .collect::<Result<Vec<_>>>()?;
            let error = Some(rec[rec.len() - 1].to_string()).filter(|s| !s.is_empty());
            rows.push(CompareRow { model: rec[0].to_string(), lda, values, error });
        }
        Ok(CompareTable { metrics, rows })
    }

    /// Markdown with one block per LDA setting, values as percentages.
    pub fn to_markdown(&self) -> String {
        let mut out = String::new();
        for lda in [false, true] {
            let rows: Vec<&CompareRow> = self.rows.iter().filter(|r| r.lda == lda).collect();
            if rows.is_empty() {
                continue;
            }
            out.push_str(if lda { "### With LDA\n\n" } else { "### Without LDA\n\n" });
            out.push_str("| Model |");
            for m in &self.metrics {
                out.push_str(&format!(" {m} (%) |"));
            }
            out.push_str("\n|---|");
            out.push_str(&"---:|".repeat(self.metrics.len()));
            out.push('\n');
            for r in rows {
                out.push_str(&format!("| {} |", r.model));
                match &r.error {
                    Some(e) => {
                        out.push_str(&format!(" error: {} |", e.replace('|', "/")));
                        out.push_str(&" |".repeat(self.metrics.len().saturating_sub(1)));
                    }
                    None => {
                        for v in &r.values {
                            match v {
                                Some(x) => out.push_str(&format!(" {:.2} |", 100.0 * x)),
                                None => out.push_str(" n/a |"),
                            }
                        }
                    }
                }
                out.push('\n');
            }
            out.push('\n');
        }
        out
    }
}
