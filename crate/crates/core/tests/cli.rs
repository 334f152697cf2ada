use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use cvrisk::analyze::{analyze_csv, ModelSpec};
use cvrisk::experiments::ExperimentConfig;
use tempfile::TempDir;

fn cvrisk(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cvrisk")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

/// Deterministic regression data, no RNG so the file is easy to eyeball.
fn ridge_csv(n: usize) -> String {
    let mut s = String::from("x1,x2,y\n");
    for i in 0..n {
        let a = ((i * 37) % 11) as f64 / 5.0 - 1.0;
        let b = ((i * 53) % 7) as f64 / 3.0 - 1.0;
        let y = 0.8 * a - 0.3 * b + (((i * 29) % 13) as f64 / 13.0 - 0.5);
        let _ = writeln!(s, "{a},{b},{y}");
    }
    s
}

#[test]
fn analyze_matches_library_exactly() {
    let dir = TempDir::new().unwrap();
    let data = write(&dir, "ridge.csv", &ridge_csv(40));
    let out = cvrisk(&["analyze", data.to_str().unwrap(), "--k", "4", "--lambda", "0.5", "--format", "csv"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let lib = analyze_csv(&data, 4, ModelSpec::Ridge { lambda: 0.5 }, 0.05).unwrap();
    assert_eq!(stdout(&out), lib.to_csv());
    assert!(stdout(&out).contains("variance_method,ridge-woodbury"));
}

#[test]
fn analyze_text_and_out_file() {
    let dir = TempDir::new().unwrap();
    let data = write(&dir, "ridge.csv", &ridge_csv(40));
    let report = dir.path().join("report.csv");
    let out = cvrisk(&["analyze", data.to_str().unwrap(), "--model", "mean", "--out", report.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let lib = analyze_csv(&data, 2, ModelSpec::Mean, 0.05).unwrap();
    assert_eq!(stdout(&out), lib.to_text());
    assert_eq!(std::fs::read_to_string(&report).unwrap(), lib.to_csv());
}

#[test]
fn lda_with_single_class_training_fold_exits_3() {
    let dir = TempDir::new().unwrap();
    // Rows 0..4 are all class 0, so the fit that trains on block 0 alone sees one class.
    let csv = "x1,y\n0.1,0\n0.4,0\n0.2,0\n0.9,0\n1.5,1\n0.3,0\n2.2,1\n1.9,1\n";
    let data = write(&dir, "lda.csv", csv);
    let out = cvrisk(&["analyze", data.to_str().unwrap(), "--model", "lda"]);
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
    assert!(stderr(&out).contains("fold 1"), "{}", stderr(&out));
}

#[test]
fn duplicate_header_names_the_column() {
    let dir = TempDir::new().unwrap();
    let data = write(&dir, "dup.csv", "x1,x2,x1,y\n1,2,3,4\n");
    let out = cvrisk(&["analyze", data.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert!(err.contains("line 1") && err.contains("`x1`"), "{err}");
}

#[test]
fn malformed_row_reports_line_number() {
    let dir = TempDir::new().unwrap();
    let data = write(&dir, "bad.csv", "x1,y\n1,2\n3,4\n5,oops\n7,8\n");
    let out = cvrisk(&["analyze", data.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert!(err.contains("line 4") && err.contains("oops"), "{err}");
}

#[test]
fn missing_data_file_exits_2() {
    let out = cvrisk(&["analyze", "/nonexistent/data.csv"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn usage_error_exits_2() {
    let out = cvrisk(&["ridge-speedup", "--no-such-flag"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn config_for_another_subcommand_is_rejected() {
    let cfg = configs().join("lda_fast.json");
    let out = cvrisk(&["ridge-speedup", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("lda-speedup"), "{}", stderr(&out));
}

#[test]
fn unknown_config_field_is_rejected() {
    let dir = TempDir::new().unwrap();
    let text = std::fs::read_to_string(configs().join("ridge_speedup.json")).unwrap();
    let bad = text.replacen("\"k\": 2", "\"k\": 2, \"folds\": 3", 1);
    assert_ne!(bad, text);
    let cfg = write(&dir, "bad.json", &bad);
    let out = cvrisk(&["ridge-speedup", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("folds"), "{}", stderr(&out));
}

#[test]
fn invalid_config_value_is_rejected() {
    let dir = TempDir::new().unwrap();
    let text = std::fs::read_to_string(configs().join("ridge_speedup.json")).unwrap();
    let cfg = write(&dir, "k1.json", &text.replacen("\"k\": 2", "\"k\": 1", 1));
    let out = cvrisk(&["ridge-speedup", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
}

#[test]
fn small_experiment_writes_csv_and_markdown() {
    let dir = TempDir::new().unwrap();
    let text = std::fs::read_to_string(configs().join("ridge_speedup.json")).unwrap();
    let small = text.replacen("[50, 100, 200, 500, 1000]", "[20, 40]", 1);
    let cfg = write(&dir, "small.json", &small);
    let csv_path = dir.path().join("table.csv");
    let cfg_arg = cfg.to_str().unwrap();
    let out = cvrisk(&["ridge-speedup", "--config", cfg_arg, "--replicates", "50", "--out", csv_path.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let table = std::fs::read_to_string(&csv_path).unwrap();
    assert!(table.lines().any(|l| l.contains("speedup")), "{table}");

    let md = cvrisk(&["ridge-speedup", "--config", cfg_arg, "--replicates", "50", "--threads", "2", "--format", "md"]);
    assert!(md.status.success(), "{}", stderr(&md));
    assert!(stdout(&md).contains('|'));
}

#[test]
fn shipped_configs_parse_and_validate() {
    let mut count = 0;
    for entry in std::fs::read_dir(configs()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().and_then(|e| e.to_str()) != Some("json") {
            continue;
        }
        let cfg = ExperimentConfig::from_path(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        cfg.validate().unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        count += 1;
    }
    assert_eq!(count, 6);
}
