use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use hsb_cli::config::{ExperimentConfig, ExperimentId, RhoGrid};
use hsb_cli::experiments::header;
use hsb_cli::report::{sibling, Report};
use serde_json::Value;

fn hsb(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hsb")).args(args).output().expect("hsb runs")
}

fn docs(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs").join(name)
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn config(model: &str, experiment: ExperimentId) -> ExperimentConfig {
    ExperimentConfig::new(model.parse().unwrap(), experiment)
}

#[test]
fn flat_identities_vanish_and_exit_zero() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("flat.json");
    let out = hsb(&["run", "identities", "--model", "flat(2)", "--report", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report = Report::from_json(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(report.summary.fail, 0);
    for family in ["skew_symmetry", "type_vanishing", "defining_relation", "torsion_d_omega", "connection_difference", "kahler", "balanced"] {
        let prefix = format!("identities.{family}");
        let cases: Vec<_> = report.cases.iter().filter(|c| c.id.starts_with(&prefix)).collect();
        assert!(!cases.is_empty(), "{prefix}");
        for c in cases {
            assert_eq!(c.lhs, Some(0.0), "{}", c.id);
        }
    }
}

#[test]
fn thm11_reports_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let runs: Vec<Vec<u8>> = (0..2)
        .map(|i| {
            let path = dir.path().join(format!("r{i}.json"));
            let out = hsb(&["run", "thm11", "--model", "hopf(2)", "--cases", "20", "--seed", "7", "--report", path.to_str().unwrap()]);
            assert_eq!(out.status.code(), Some(0));
            std::fs::read(&path).unwrap()
        })
        .collect();
    assert_eq!(runs[0], runs[1]);
}

#[test]
fn full_suite_matches_manifest() {
    let manifest = read_json(&docs("suite_manifest.json"));
    let report = hsb_cli::run(&config("fubini_study(1,1.0)", ExperimentId::FullSuite)).unwrap();
    assert_eq!(report.header.config_hash, manifest["config_hash"].as_str().unwrap());
    assert_eq!(report.summary.pass as u64, manifest["pass"].as_u64().unwrap());
    assert_eq!(report.summary.fail as u64, manifest["fail"].as_u64().unwrap());
    assert_eq!(report.summary.diagnostic as u64, manifest["diagnostic"].as_u64().unwrap());
}

#[test]
fn unknown_config_key_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cfg.json");
    std::fs::write(&path, r#"{"model": {"name": "flat", "params": [1]}, "experiment": "identities", "params": {"pionts": 3}}"#)
        .unwrap();
    let out = hsb(&["run", "identities", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_model_and_bad_params_exit_two() {
    assert_eq!(hsb(&["run", "identities", "--model", "sphere(2)"]).status.code(), Some(2));
    assert_eq!(hsb(&["run", "identities", "--model", "fubini_study(1,-1)"]).status.code(), Some(2));
}

#[test]
fn report_round_trips() {
    let mut cfg = config("hopf(2)", ExperimentId::Thm12);
    cfg.params.cases = 3;
    let report = hsb_cli::run(&cfg).unwrap();
    let text = report.to_json();
    let back = Report::from_json(&text).unwrap();
    assert_eq!(back, report);
    assert_eq!(back.to_json(), text);
}

#[test]
fn empty_report_has_zero_summary() {
    let report = Report::new(header(&config("flat(1)", ExperimentId::Identities)));
    let v: Value = serde_json::from_str(&report.to_json()).unwrap();
    assert_eq!(v["summary"], serde_json::json!({"pass": 0, "fail": 0, "diagnostic": 0}));
    assert_eq!(v["cases"], serde_json::json!([]));
}

#[test]
fn comparison_csv_has_one_row_per_sample() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config("fubini_study(1,1.0)", ExperimentId::Laplacian);
    cfg.params.directions = 4;
    cfg.params.rho_grid = RhoGrid { start: 0.2, end: 0.6, count: 3 };
    let report = hsb_cli::run(&cfg).unwrap();
    let csv_path = dir.path().join("lap.csv");
    report.write_csv(&csv_path).unwrap();
    let samples = report.tables["comparison"].rows.len();
    assert_eq!(samples, 12);
    let table = std::fs::read_to_string(sibling(&csv_path, "comparison")).unwrap();
    assert_eq!(table.lines().count(), samples + 1);
    let cases = std::fs::read_to_string(&csv_path).unwrap();
    assert_eq!(cases.lines().count(), report.cases.len() + 1);
}

#[test]
fn geodesic_csv_has_one_row_per_node() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("geo.csv");
    let out = hsb(&[
        "geodesic", "--model", "hopf(2)", "--from", "1,0.5i", "--dir", "0,1,0.5,0", "--length", "1", "--steps", "50",
        "--out", path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), 52);
    assert!(text.starts_with("t,"));
}

#[test]
fn point_queries_emit_json() {
    let out = hsb(&["curvature", "--model", "fubini_study(1,1.0)", "--point", "0.3+0.1i", "--ricci", "--hsc", "1,0"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v.is_object());
    let out = hsb(&["connections", "--model", "hopf(2)", "--point", "1,0.2i", "--flavor", "sb"]);
    assert_eq!(out.status.code(), Some(0));
    serde_json::from_slice::<Value>(&out.stdout).unwrap();
}

fn schema_keys(schema: &Value, pointer: &str) -> BTreeSet<String> {
    schema.pointer(pointer).unwrap().as_object().unwrap().keys().cloned().collect()
}

fn value_keys(v: &Value) -> BTreeSet<String> {
    v.as_object().unwrap().keys().cloned().collect()
}

#[test]
fn shipped_schemas_cover_every_field() {
    let schema = read_json(&docs("config.schema.json"));
    let mut cfg = config("flat(1)", ExperimentId::Identities);
    cfg.output.report = Some("r.json".into());
    let v = serde_json::to_value(&cfg).unwrap();
    assert_eq!(schema_keys(&schema, "/properties"), value_keys(&v));
    assert_eq!(schema_keys(&schema, "/properties/params/properties"), value_keys(&v["params"]));
    assert_eq!(schema_keys(&schema, "/properties/tolerances/properties"), value_keys(&v["tolerances"]));
    for (key, prop) in schema.pointer("/properties/tolerances/properties").unwrap().as_object().unwrap() {
        assert_eq!(prop["default"], v["tolerances"][key], "{key}");
    }

    let schema = read_json(&docs("report.schema.json"));
    let mut cfg = config("fubini_study(1,1.0)", ExperimentId::Volume);
    cfg.params.directions = 2;
    let v = serde_json::to_value(hsb_cli::run(&cfg).unwrap()).unwrap();
    assert_eq!(schema_keys(&schema, "/properties"), value_keys(&v));
    assert_eq!(schema_keys(&schema, "/properties/header/properties"), value_keys(&v["header"]));
    assert_eq!(schema_keys(&schema, "/properties/summary/properties"), value_keys(&v["summary"]));
    assert_eq!(schema_keys(&schema, "/properties/cases/items/properties"), value_keys(&v["cases"][0]));
}
