//! Explanation artifacts: JSON records plus plot-ready CSV.

use credo_core::explain::{lime_explain, morris_screen, LimeExplanation, MorrisOutput, MorrisScreening};
use credo_core::{Matrix, Model};
use serde::Serialize;

use crate::config::{LimeParams, MorrisParams};
use crate::error::Result;

pub type Artifact = (String, Vec<u8>);

#[derive(Debug, Serialize)]
struct LimeRecord<'a> {
    method: &'static str,
    model: &'a str,
    row: usize,
    class: usize,
    class_name: &'a str,
    intercept: f64,
    r_squared: f64,
    kernel_width: f64,
    n_samples: usize,
    seed: u64,
    importances: Vec<Scored<'a>>,
    weights: Vec<Scored<'a>>,
    constant_features: Vec<&'a str>,
}

#[derive(Debug, Serialize)]
struct Scored<'a> {
    feature: &'a str,
    value: f64,
}

#[derive(Debug, Serialize)]
struct MorrisRecord<'a> {
    method: &'static str,
    model: &'a str,
    class: usize,
    class_name: &'a str,
    trajectories: usize,
    levels: usize,
    delta: f64,
    seed: u64,
    features: Vec<MorrisRow<'a>>,
    excluded: Vec<&'a str>,
}

#[derive(Debug, Serialize)]
struct MorrisRow<'a> {
    feature: &'a str,
    mu: f64,
    mu_star: f64,
    sigma: f64,
}

fn json<T: Serialize>(v: &T) -> Vec<u8> {
    serde_json::to_vec_pretty(v).expect("explanation serializes")
}

/// Explains the predicted class of `x[row]` against `background`.
pub fn lime(
    tag: &str,
    model: &dyn Model,
    features: &[String],
    classes: &[String],
    background: &Matrix,
    x: &Matrix,
    row: usize,
    params: &LimeParams,
) -> Result<(LimeExplanation, Vec<Artifact>)> {
    if row >= x.rows() {
        return Err(crate::error::CliError::Config(format!("row {row} out of range ({} rows)", x.rows())));
    }
    let point = x.row(row);
    let class = model.predict(&Matrix::from_rows(&[point]))?[0];
    let mut e = lime_explain(model, background, point, class, &params.into())?;
    e.row_index = Some(row);
    let rec = LimeRecord {
        method: "lime",
        model: tag,
        row,
        class,
        class_name: &classes[class],
        intercept: e.intercept,
        r_squared: e.r_squared,
        kernel_width: e.kernel_width,
        n_samples: e.n_samples,
        seed: e.seed,
        importances: e.importances.iter().map(|f| Scored { feature: &features[f.index], value: f.score }).collect(),
        weights: e.weights.iter().enumerate().map(|(j, &w)| Scored { feature: &features[j], value: w }).collect(),
        constant_features: e.constant_features.iter().map(|&j| features[j].as_str()).collect(),
    };
    let mut csv = String::from("feature,score\n");
    for f in &e.importances {
        csv.push_str(&format!("{},{}\n", quote(&features[f.index]), f.score));
    }
    let base = format!("{tag}_lime_row{row}");
    let files = vec![(format!("{base}.json"), json(&rec)), (format!("{base}.csv"), csv.into_bytes())];
    Ok((e, files))
}

pub fn morris(
    tag: &str,
    model: &dyn Model,
    features: &[String],
    classes: &[String],
    ranges: &[(f64, f64)],
    params: &MorrisParams,
) -> Result<(MorrisScreening, Vec<Artifact>)> {
    let output = match params.class {
        Some(c) => MorrisOutput::ClassProb(c),
        None => MorrisOutput::PredictedClassProb,
    };
    let s = morris_screen(model, ranges, output, &params.into())?;
    let mut order: Vec<usize> = s.ranking().iter().map(|f| f.index).collect();
    order.extend(s.excluded.iter().copied());
    let rows: Vec<MorrisRow> = order
        .iter()
        .map(|&j| MorrisRow { feature: &features[j], mu: s.mu[j], mu_star: s.mu_star[j], sigma: s.sigma[j] })
        .collect();
    let mut csv = String::from("feature,score\n");
    for r in &rows {
        csv.push_str(&format!("{},{}\n", quote(r.feature), r.mu_star));
    }
    let rec = MorrisRecord {
        method: "morris",
        model: tag,
        class: s.class,
        class_name: &classes[s.class],
        trajectories: s.n_trajectories(),
        levels: s.levels,
        delta: s.delta,
        seed: s.seed,
        features: rows,
        excluded: s.excluded.iter().map(|&j| features[j].as_str()).collect(),
    };
    let files = vec![(format!("{tag}_morris.json"), json(&rec)), (format!("{tag}_morris.csv"), csv.into_bytes())];
    Ok((s, files))
}

fn quote(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}
