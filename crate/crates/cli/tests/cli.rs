use std::path::Path;
use std::process::{Command, Output};

fn smoothntf(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_smoothntf")).args(args).current_dir(dir).output().unwrap()
}

fn ok(args: &[&str], dir: &Path) -> String {
    let out = smoothntf(args, dir);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn records(text: &str) -> Vec<Vec<String>> {
    csv::Reader::from_reader(text.as_bytes())
        .records()
        .map(|r| r.unwrap().iter().map(str::to_string).collect())
        .collect()
}

#[test]
fn factorize_writes_a_descending_report_and_a_model() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["gen-toy", "--size", "12", "--rank", "2", "--seed", "5", "--out", "toy"], d);
    ok(&["factorize", "--x", "toy/x.dnt", "--w", "toy/w.dnt", "--rank", "2", "--alpha", "0.01,0.01,0", "--out", "fit"], d);
    let report = std::fs::read_to_string(d.join("fit/fit_report.csv")).unwrap();
    assert!(report.starts_with("iteration,objective,elapsed_seconds\n"));
    let objectives: Vec<f64> = records(&report).iter().map(|r| r[1].parse().unwrap()).collect();
    assert!(objectives.len() > 1);
    assert!(objectives.windows(2).all(|p| p[1] <= p[0] * (1.0 + 1e-10)));
    for name in ["lambda.dnt", "factor_1.dnt", "factor_2.dnt", "factor_3.dnt"] {
        assert!(d.join("fit").join(name).is_file());
    }

    let metrics = ok(&["metrics", "--truth", "toy/truth", "--estimate", "fit"], d);
    let rows = records(&metrics);
    assert_eq!(rows[0][0], "nmse");
    assert_eq!(rows[1][0], "sim");
    let sim: f64 = rows[1][1].parse().unwrap();
    assert!((0.0..=1.0 + 1e-12).contains(&sim));
}

#[test]
fn cv_reports_one_row_per_grid_value_and_one_selection() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["gen-toy", "--size", "8", "--rank", "2", "--seed", "1", "--out", "toy"], d);
    let out = ok(&["cv", "--x", "toy/x.dnt", "--w", "toy/w.dnt", "--rank", "2", "--folds", "3", "--max-iter", "100"], d);
    let rows = records(&out);
    assert_eq!(rows.len(), 7);
    assert_eq!(rows.iter().filter(|r| r[2] == "1").count(), 1);
    // a zero α leaves every held-out slice unconstrained
    assert_eq!(rows[0][1], "");
}

#[test]
fn check_coercivity_names_the_missing_cylinder() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["gen-toy", "--size", "8", "--rank", "1", "--seed", "2", "--out", "toy"], d);
    assert_eq!(ok(&["check-coercivity", "--w", "toy/w.dnt", "--alpha", "1,1,1"], d).trim(), "coercive");
    // with no mode penalized every missing entry is its own cylinder
    let out = smoothntf(&["check-coercivity", "--w", "toy/w.dnt", "--alpha", "0,0,0"], d);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("not coercive"));
}

#[test]
fn malformed_input_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("bad.dnt"), b"not a tensor").unwrap();
    let out = smoothntf(&["check-coercivity", "--w", "bad.dnt", "--alpha", "1"], d);
    assert_eq!(out.status.code(), Some(1));
    assert!(!out.stderr.is_empty());
}
