use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use credo::archive::Archive;
use credo::config::PipelineConfig;
use credo::io::{load_csv, save_csv};
use credo::models::Fitted;
use credo::pipeline::{self, ExplainMethod, Outputs};
use credo::report::CompareTable;
use credo_core::baselines::LogisticRegression;
use credo_core::synth::{generate, SynthSpec};
use serde_json::Value;

fn credo(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_credo")).args(args).current_dir(cwd).output().expect("binary runs")
}

fn small_data(dir: &Path) -> PathBuf {
    let spec = SynthSpec { rows: 1500, features: 12, classes: 5, seed: 3, ..SynthSpec::default() };
    let path = dir.join("data.csv");
    save_csv(&generate(&spec).unwrap(), &path).unwrap();
    path
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

const GBT_SMALL: &str = r#"{"name": "gbt", "rounds": 15, "max_depth": 3}"#;

fn read_json(path: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

#[test]
fn synth_default_shape_and_null_rates() {
    let dir = tempfile::tempdir().unwrap();
    let out = credo(&["synth", "-o", "d.csv"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let f = load_csv(&dir.path().join("d.csv"), &BTreeMap::new()).unwrap();
    assert_eq!((f.n_rows(), f.n_cols()), (20_000, 31));
    let spec = SynthSpec::default();
    for (col, rate) in f.columns().iter().zip(spec.default_null_rates()) {
        assert!((col.null_fraction() - rate).abs() <= 0.01, "{} vs {rate}", col.null_fraction());
    }
}

#[test]
fn synth_round_trips_bit_exactly_and_seeds_differ() {
    let dir = tempfile::tempdir().unwrap();
    let spec = SynthSpec { rows: 500, seed: 9, ..SynthSpec::default() };
    let frame = generate(&spec).unwrap();
    assert!(credo(&["synth", "-o", "a.csv", "--rows", "500", "--seed", "9"], dir.path()).status.success());
    assert!(credo(&["synth", "-o", "b.csv", "--rows", "500", "--seed", "10"], dir.path()).status.success());
    let a = load_csv(&dir.path().join("a.csv"), &BTreeMap::new()).unwrap();
    let b = load_csv(&dir.path().join("b.csv"), &BTreeMap::new()).unwrap();
    assert_eq!(a.names(), frame.names());
    for (x, y) in a.columns().iter().zip(frame.columns()) {
        assert_eq!(x.kind(), y.kind());
        assert_eq!(x.missing_mask(), y.missing_mask());
        if let (Some(u), Some(v)) = (x.as_numeric(), y.as_numeric()) {
            for i in 0..u.len() {
                assert!(x.is_missing(i) || u[i].to_bits() == v[i].to_bits());
            }
        } else {
            assert_eq!(x.as_categorical(), y.as_categorical());
        }
    }
    assert_eq!(a.names(), b.names());
    assert_ne!(std::fs::read(dir.path().join("a.csv")).unwrap(), std::fs::read(dir.path().join("b.csv")).unwrap());
}

#[test]
fn synth_rejects_too_few_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = credo(&["synth", "-o", "d.csv", "--rows", "30", "--classes", "10"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn run_writes_report_metrics_and_archive() {
    let dir = tempfile::tempdir().unwrap();
    small_data(dir.path());
    let cfg = write_config(dir.path(), "cfg.json", &format!(r#"{{"data": "data.csv", "models": [{GBT_SMALL}]}}"#));
    let out = credo(&["run", "-c", cfg.to_str().unwrap()], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = read_json(&dir.path().join("out/report.json"));
    let values = &report["results"][0]["metrics"]["values"];
    for m in ["accuracy", "sensitivity", "specificity", "g_mean", "f1", "h_measure"] {
        let v = values[m].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&v), "{m} = {v}");
    }
    // The echo carries defaulted fields.
    assert_eq!(report["config"]["null_threshold"], 0.5);
    assert_eq!(report["config"]["split"]["train_fraction"], 0.8);
    assert_eq!(report["config"]["models"][0]["lambda"], 1.0);
    assert_eq!(report["preprocessing"]["smote_path"], "after_split");
    let counts = report["preprocessing"]["class_counts_after_smote"].as_array().unwrap();
    assert!(counts.windows(2).all(|w| w[0] == w[1]));
    assert!(dir.path().join("out/models/gbt/manifest.json").exists());
    let table = CompareTable::from_csv(&std::fs::read_to_string(dir.path().join("out/metrics.csv")).unwrap()).unwrap();
    assert_eq!(table.rows.len(), 1);
}

#[test]
fn metrics_csv_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    small_data(dir.path());
    let body = format!(
        r#"{{"data": "data.csv", "lda": {{"enabled": true}}, "models": [{GBT_SMALL}, {{"name": "mlp", "hidden": [16], "epochs": 5}}]}}"#
    );
    let cfg = write_config(dir.path(), "cfg.json", &body);
    let mut seen = Vec::new();
    for out in ["a", "b"] {
        let o = credo(&["run", "-c", cfg.to_str().unwrap(), "--out", out], dir.path());
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        seen.push(std::fs::read(dir.path().join(out).join("metrics.csv")).unwrap());
    }
    assert_eq!(seen[0], seen[1]);
}

#[test]
fn unknown_model_fails_before_any_output() {
    let dir = tempfile::tempdir().unwrap();
    small_data(dir.path());
    let cfg = write_config(dir.path(), "cfg.json", r#"{"data": "data.csv", "models": [{"name": "svm"}]}"#);
    let out = credo(&["run", "-c", cfg.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("models[0]"));
    assert!(!dir.path().join("out").exists());
}

#[test]
fn missing_data_file_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "cfg.json", r#"{"data": "nope.csv", "models": [{"name": "gnb"}]}"#);
    assert_eq!(credo(&["run", "-c", cfg.to_str().unwrap()], dir.path()).status.code(), Some(3));
}

#[test]
fn diverging_training_is_a_numeric_failure() {
    let dir = tempfile::tempdir().unwrap();
    small_data(dir.path());
    let cfg = write_config(
        dir.path(),
        "cfg.json",
        r#"{"data": "data.csv", "models": [{"name": "mlp", "hidden": [8], "epochs": 3, "learning_rate": 1e300}]}"#,
    );
    let out = credo(&["run", "-c", cfg.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(!dir.path().join("out").exists());
}

#[test]
fn smote_before_split_flag_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    small_data(dir.path());
    let cfg = write_config(dir.path(), "cfg.json", r#"{"data": "data.csv", "models": [{"name": "gnb"}]}"#);
    let out = credo(&["run", "-c", cfg.to_str().unwrap(), "--smote-before-split"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = read_json(&dir.path().join("out/report.json"));
    assert_eq!(report["preprocessing"]["smote_path"], "before_split");
    assert_eq!(report["config"]["smote"]["placement"], "before_split");
}

#[test]
fn rows_without_target_are_dropped_with_a_warning() {
    let dir = tempfile::tempdir().unwrap();
    let path = small_data(dir.path());
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
    for line in lines.iter_mut().skip(1).take(7) {
        let cut = line.rfind(',').unwrap();
        line.truncate(cut + 1);
    }
    std::fs::write(&path, lines.join("\n") + "\n").unwrap();
    let mut cfg = PipelineConfig::from_json(r#"{"data": "data.csv", "models": [{"name": "gnb"}]}"#).unwrap();
    cfg.resolve_paths(dir.path());
    let r = pipeline::run(&cfg).unwrap();
    assert_eq!(r.report.preprocessing.rows_dropped_missing_target, 7);
    assert!(r.report.warnings.iter().any(|w| w.code == "rows_missing_target"));
}

#[test]
fn compare_shape_and_agreement_with_run() {
    let dir = tempfile::tempdir().unwrap();
    small_data(dir.path());
    let mut cfg = PipelineConfig::from_json(&format!(
        r#"{{"data": "data.csv", "models": [{GBT_SMALL}, {{"name": "logreg"}}]}}"#
    ))
    .unwrap();
    cfg.resolve_paths(dir.path());
    let c = pipeline::compare(&cfg).unwrap();
    assert_eq!(c.table.rows.len(), 4);
    assert_eq!(
        c.table.rows.iter().map(|r| (r.model.as_str(), r.lda)).collect::<Vec<_>>(),
        [("gbt", false), ("logreg", false), ("gbt", true), ("logreg", true)]
    );
    assert!(c.table.rows.iter().all(|r| r.error.is_none()));
    assert_eq!(CompareTable::from_csv(&c.table.to_csv()).unwrap(), c.table);

    cfg.models.truncate(1);
    let single = pipeline::compare(&cfg).unwrap();
    let run = pipeline::run(&cfg).unwrap();
    assert_eq!(single.table.rows[0].values, run.table.rows[0].values);
}

#[test]
fn compare_records_failures_and_continues() {
    let dir = tempfile::tempdir().unwrap();
    small_data(dir.path());
    let mut cfg = PipelineConfig::from_json(
        r#"{"data": "data.csv", "models": [{"name": "gnb"}, {"name": "mlp", "hidden": [8], "epochs": 2, "learning_rate": 1e300}]}"#,
    )
    .unwrap();
    cfg.resolve_paths(dir.path());
    let c = pipeline::compare(&cfg).unwrap();
    assert_eq!(c.table.rows.len(), 4);
    assert!(c.table.rows.iter().filter(|r| r.model == "gnb").all(|r| r.error.is_none()));
    assert!(c.table.rows.iter().filter(|r| r.model == "mlp").all(|r| r.error.is_some()));
    assert!(c.table.to_markdown().contains("error:"));
}

#[test]
fn archive_round_trip_reproduces_predictions() {
    let dir = tempfile::tempdir().unwrap();
    let data = small_data(dir.path());
    for lda in [false, true] {
        let mut cfg = PipelineConfig::from_json(&format!(
            r#"{{"data": "data.csv", "lda": {{"enabled": {lda}}}, "models": [
                {GBT_SMALL}, {{"name": "logreg"}}, {{"name": "gnb"}}, {{"name": "tree"}},
                {{"name": "forest", "n_trees": 5}}, {{"name": "mlp", "hidden": [8], "epochs": 2}},
                {{"name": "lda"}}, {{"name": "xgdnn", "gbt": {{"rounds": 5}}, "mlp": {{"hidden": [8], "epochs": 2}}}}]}}"#
        ))
        .unwrap();
        cfg.resolve_paths(dir.path());
        let r = pipeline::run(&cfg).unwrap();
        let out = dir.path().join(format!("lda_{lda}"));
        r.outputs.commit(&out).unwrap();
        let raw = load_csv(&data, &BTreeMap::new()).unwrap();
        for name in credo::config::MODEL_NAMES {
            let a = Archive::load(&out.join("models").join(name)).unwrap();
            assert_eq!(a.model.kind(), name);
            let x = a.prep.transform(&raw).unwrap();
            let p = a.model.model().predict_proba(&x).unwrap();
            // A second save and load is byte-stable.
            let again = dir.path().join("again");
            a.save(&again).unwrap();
            let b = Archive::load(&again).unwrap();
            assert_eq!(b.model.model().predict_proba(&x).unwrap(), p, "{name}");
            for f in ["manifest.json", "index.json", "arrays.bin"] {
                assert_eq!(
                    std::fs::read(again.join(f)).unwrap(),
                    std::fs::read(out.join("models").join(name).join(f)).unwrap(),
                    "{name}/{f}"
                );
            }
        }
    }
}

#[test]
fn tampered_manifest_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    small_data(dir.path());
    let mut cfg = PipelineConfig::from_json(r#"{"data": "data.csv", "models": [{"name": "gnb"}]}"#).unwrap();
    cfg.resolve_paths(dir.path());
    pipeline::run(&cfg).unwrap().outputs.commit(&dir.path().join("o")).unwrap();
    let m = dir.path().join("o/models/gnb/manifest.json");
    let text = std::fs::read_to_string(&m).unwrap().replacen("\"grade\"", "\"grades\"", 1);
    std::fs::write(&m, text).unwrap();
    let e = Archive::load(&dir.path().join("o/models/gnb")).unwrap_err();
    assert_eq!(e.exit_code(), 3);
}

#[test]
fn explain_outputs() {
    let dir = tempfile::tempdir().unwrap();
    small_data(dir.path());
    let cfg = write_config(dir.path(), "cfg.json", &format!(r#"{{"data": "data.csv", "models": [{GBT_SMALL}]}}"#));
    assert!(credo(&["run", "-c", cfg.to_str().unwrap()], dir.path()).status.success());

    let o = credo(&["explain", "-m", "lime", "-a", "out/models/gbt", "-d", "data.csv", "--row", "0", "--out", "ex"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let lime = read_json(&dir.path().join("ex/explanations/gbt_lime_row0.json"));
    let sum: f64 = lime["importances"].as_array().unwrap().iter().map(|v| v["value"].as_f64().unwrap()).sum();
    assert!((sum - 1.0).abs() < 1e-12, "{sum}");

    let o = credo(&["explain", "-m", "morris", "-a", "out/models/gbt", "-d", "data.csv", "--out", "ex"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("ex/explanations/gbt_morris.csv")).unwrap();
    let mu_star: Vec<f64> = csv.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert!(!mu_star.is_empty());
    assert!(mu_star.windows(2).all(|w| w[0] >= w[1]), "{mu_star:?}");
}

#[test]
fn constant_model_archive_has_zero_morris_scores() {
    let dir = tempfile::tempdir().unwrap();
    let data = small_data(dir.path());
    let mut cfg = PipelineConfig::from_json(r#"{"data": "data.csv", "models": [{"name": "logreg"}]}"#).unwrap();
    cfg.resolve_paths(dir.path());
    pipeline::run(&cfg).unwrap().outputs.commit(&dir.path().join("o")).unwrap();
    let mut a = Archive::load(&dir.path().join("o/models/logreg")).unwrap();
    let (d, c) = (a.model.model().n_features(), a.model.model().n_classes());
    a.model = Fitted::Logreg(LogisticRegression::zeros(d, c));
    a.save(&dir.path().join("constant")).unwrap();
    let files = pipeline::explain_archive(
        &dir.path().join("constant"),
        &data,
        &ExplainMethod::Morris(credo::config::MorrisParams::default()),
    )
    .unwrap();
    let json: Value = serde_json::from_slice(&files.iter().find(|(n, _)| n.ends_with(".json")).unwrap().1).unwrap();
    for f in json["features"].as_array().unwrap() {
        for k in ["mu", "mu_star", "sigma"] {
            assert_eq!(f[k].as_f64().unwrap(), 0.0);
        }
    }
}

#[test]
fn explain_reports_schema_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let data = small_data(dir.path());
    let cfg = write_config(dir.path(), "cfg.json", r#"{"data": "data.csv", "models": [{"name": "gnb"}]}"#);
    assert!(credo(&["run", "-c", cfg.to_str().unwrap()], dir.path()).status.success());
    let text = std::fs::read_to_string(&data).unwrap();
    let renamed = text.replacen("grade", "grade_letter", 1);
    std::fs::write(dir.path().join("renamed.csv"), renamed).unwrap();
    let o = credo(&["explain", "-m", "morris", "-a", "out/models/gnb", "-d", "renamed.csv"], dir.path());
    assert_eq!(o.status.code(), Some(3));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("missing columns [grade]") && err.contains("unexpected columns [grade_letter]"), "{err}");
}

#[test]
fn failed_commit_removes_partial_files() {
    let dir = tempfile::tempdir().unwrap();
    // A plain file where a directory is needed makes the second write fail.
    std::fs::write(dir.path().join("blocked"), b"x").unwrap();
    let mut outputs = Outputs::default();
    outputs.add("first.txt", b"1".to_vec());
    outputs.add("blocked/second.txt", b"2".to_vec());
    assert!(outputs.commit(dir.path()).is_err());
    assert!(!dir.path().join("first.txt").exists());
}

#[test]
fn bundled_configs_are_valid() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for name in ["synthetic.json", "lending_club.json"] {
        let cfg = PipelineConfig::load(&root.join(name)).unwrap();
        cfg.validate().unwrap();
        assert!(cfg.data.is_absolute() || cfg.data.starts_with(&root));
    }
}
