use std::path::Path;
use std::process::{Command, Output};

use ldb_core::experiment::{parse_csv_report, Method};
use ldb_core::{Dataset, EnsembleSpec, ExperimentConfig};

fn ldb(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ldb"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = ldb(args);
    assert!(
        out.status.success(),
        "ldb {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn dump_filters_lists_every_tap() {
    let s = ok(&["dump-filters", "--taps", "18"]);
    let rows: Vec<&str> = s.lines().skip(1).collect();
    assert_eq!(rows.len(), 18);
    let sum: f64 = rows
        .iter()
        .map(|r| r.split('\t').nth(1).unwrap().parse::<f64>().unwrap())
        .sum();
    assert!((sum - 2f64.sqrt()).abs() < 1e-12);
}

#[test]
fn gen_train_classify_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    ok(&[
        "gen",
        "--example",
        "ex3",
        "--seed",
        "7",
        "--train-per-class",
        "40",
        "--test-per-class",
        "20",
        "--out",
        p(&data),
    ]);
    let train = Dataset::load(&data.join("train.bin")).unwrap();
    assert_eq!(train.len(), 120);
    assert_eq!(Dataset::load(&data.join("test.bin")).unwrap().len(), 60);

    let model = dir.path().join("model.json");
    let trace = ok(&[
        "train",
        "--train",
        p(&data.join("train.bin")),
        "--measure",
        "lambda",
        "--measure",
        "lambda-double-prime",
        "--mode",
        "mldb",
        "--rest-votes",
        "discard",
        "--out",
        p(&model),
    ]);
    assert!(trace.contains("classification rate"));
    let spec = EnsembleSpec::from_json(&std::fs::read_to_string(&model).unwrap()).unwrap();
    assert_eq!(spec.members.len(), 6);
    assert_eq!(spec.rest_votes, ldb_core::classify::RestVotes::Discard);

    let preds = dir.path().join("pred.tsv");
    let out = ldb(&[
        "classify",
        "--model",
        p(&model),
        "--data",
        p(&data.join("test.bin")),
        "--out",
        p(&preds),
    ]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("misclassified"));
    let dump = std::fs::read_to_string(&preds).unwrap();
    let lines: Vec<&str> = dump.lines().collect();
    assert_eq!(lines[0], "id\ttruth\tpredicted\tweight\tvotes");
    assert_eq!(lines.len(), 61);
    for l in &lines[1..] {
        let f: Vec<&str> = l.split('\t').collect();
        assert_eq!(f.len(), 5);
        assert!(f[2] == "UNDETERMINED" || f[2].parse::<u32>().is_ok());
        assert_eq!(f[4].split(' ').count(), 6);
    }
}

#[test]
fn csv_datasets_are_accepted() {
    let dir = tempfile::tempdir().unwrap();
    ok(&[
        "gen",
        "--example",
        "ex1",
        "--train-per-class",
        "5",
        "--test-per-class",
        "2",
        "--format",
        "csv",
        "--out",
        p(dir.path()),
    ]);
    let d = Dataset::load(&dir.path().join("train.csv")).unwrap();
    assert_eq!((d.len(), d.signal_length()), (10, 1024));
}

#[test]
fn experiment_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::standard(ldb_core::Example::Ex3, 3);
    cfg.realizations = 2;
    cfg.sizes.train_per_class = 30;
    cfg.sizes.test_per_class = 30;
    let cfg_path = dir.path().join("cfg.toml");
    std::fs::write(&cfg_path, cfg.to_toml().unwrap()).unwrap();
    let out = dir.path().join("out");
    let txt = ok(&["experiment", "--config", p(&cfg_path), "--out", p(&out)]);
    for m in Method::ALL {
        assert!(txt.lines().any(|l| l.starts_with(m.name())));
    }
    let csv = std::fs::read_to_string(out.join("report.csv")).unwrap();
    let table = parse_csv_report(&csv).unwrap();
    assert_eq!(table.rows.len(), 8);
    let echoed = ExperimentConfig::load(&out.join("config.toml")).unwrap();
    assert_eq!(echoed, cfg);
    let per = std::fs::read_to_string(out.join("realizations.csv")).unwrap();
    assert_eq!(per.lines().count(), 1 + 2 * 8);
}

#[test]
fn default_config_parses_back() {
    let s = ok(&["default-config", "--example", "ex1", "--seed", "4"]);
    let c = ExperimentConfig::from_toml(&s).unwrap();
    assert_eq!(c, ExperimentConfig::standard(ldb_core::Example::Ex1, 4));
}

#[test]
fn exit_codes() {
    assert_eq!(ldb(&["bogus"]).status.code(), Some(2));
    assert_eq!(ldb(&["train", "--train", "x.bin"]).status.code(), Some(2));
    assert_eq!(
        ldb(&["gen", "--example", "ex9", "--out", "x"])
            .status
            .code(),
        Some(2)
    );
    let missing = ldb(&[
        "classify",
        "--model",
        "/nonexistent/m.json",
        "--data",
        "/nonexistent/d.bin",
    ]);
    assert_eq!(missing.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&missing.stderr).starts_with("error:"));
    assert_eq!(ldb(&["dump-filters", "--taps", "7"]).status.code(), Some(1));
}
