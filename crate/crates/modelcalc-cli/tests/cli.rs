//! Command-line behaviour: exit codes, report layout, output-directory
//! resolution, and the effect of the global overrides.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_modelcalc"))
}

fn write_cfg(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

const PASSING: &str = "name passing\n\
    base 0.3 0.1\n\
    delta_bar 0.125\n\
    tree (leaf sincos2 (synthetic (function 1 0.5 near)))\n\
    check function near expect 1\n\
    check gradient near\n";

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn missing_config_file_exits_with_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["run", "no-such-file.cfg", "--out"])
        .arg(tmp.path().join("reports"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "stderr: {}", stderr(&out));
    assert!(stderr(&out).contains("no-such-file.cfg"));
}

#[test]
fn malformed_config_reports_the_offending_line() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_cfg(
        tmp.path(),
        "bad.cfg",
        "name bad\nbase 0.3\ndelta_bar 0.125\ntree (quotient (leaf sincos1 exact))\ncheck function near\n",
    );
    let out = bin()
        .arg("run")
        .arg(&cfg)
        .arg("--out")
        .arg(tmp.path().join("reports"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert!(err.contains("line 4"), "stderr: {err}");
    assert!(err.contains("quotient"), "stderr: {err}");
}

#[test]
fn failing_check_exits_nonzero_but_still_writes_reports() {
    let tmp = tempfile::tempdir().unwrap();
    // An order-1 dial cannot meet an expect-3 window.
    let cfg = write_cfg(
        tmp.path(),
        "failing.cfg",
        "name failing\n\
         base 0.3\n\
         delta_bar 0.125\n\
         tree (leaf sincos1 (synthetic (function 1 0.5 near)))\n\
         check function near expect 3\n",
    );
    let reports = tmp.path().join("reports");
    let out = bin()
        .arg("run")
        .arg(&cfg)
        .arg("--out")
        .arg(&reports)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(reports.join("failing.summary.json").is_file());
    assert!(reports.join("failing.function.near.csv").is_file());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("FAIL"), "stdout: {stdout}");
}

#[test]
fn passing_run_writes_csv_and_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_cfg(tmp.path(), "passing.cfg", PASSING);
    let reports = tmp.path().join("reports");
    let out = bin()
        .arg("run")
        .arg(&cfg)
        .arg("--out")
        .arg(&reports)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    let csv = fs::read_to_string(reports.join("passing.function.near.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "delta,measured_error,bound_value,ok");
    assert_eq!(lines.len(), 1 + 8, "default grid has eight radii");
    assert!(lines[1..].iter().all(|l| l.ends_with(",true")));
    let summary = fs::read_to_string(reports.join("passing.summary.json")).unwrap();
    assert!(summary.contains("\"pass\": true"));
    // No leftover temporaries from the atomic writes.
    assert!(fs::read_dir(&reports)
        .unwrap()
        .all(|e| !e.unwrap().file_name().to_string_lossy().ends_with(".tmp")));
}

#[test]
fn out_directory_falls_back_to_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_cfg(tmp.path(), "passing.cfg", PASSING);
    let reports = tmp.path().join("env-reports");
    let out = bin()
        .arg("run")
        .arg(&cfg)
        .env("MODELCALC_OUT", &reports)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    assert!(reports.join("passing.summary.json").is_file());
}

#[test]
fn grid_count_override_changes_the_series_length() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_cfg(tmp.path(), "passing.cfg", PASSING);
    let reports = tmp.path().join("reports");
    let out = bin()
        .arg("run")
        .arg(&cfg)
        .args(["--grid-count", "6", "--out"])
        .arg(&reports)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    let csv = fs::read_to_string(reports.join("passing.function.near.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 6);
}

#[test]
fn seed_override_changes_the_perturbation_directions() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_cfg(tmp.path(), "passing.cfg", PASSING);
    let run = |seed: &str, dir: &str| {
        let reports = tmp.path().join(dir);
        let out = bin()
            .arg("run")
            .arg(&cfg)
            .args(["--seed", seed, "--out"])
            .arg(&reports)
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
        fs::read_to_string(reports.join("passing.gradient.near.csv")).unwrap()
    };
    let a = run("42", "a");
    let b = run("99", "b");
    assert_ne!(
        a, b,
        "different seeds must rotate the perturbation directions"
    );
}

#[test]
fn counterexamples_subcommand_writes_series_and_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let reports = tmp.path().join("counter");
    let out = bin()
        .arg("counterexamples")
        .arg("--out")
        .arg(&reports)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("DIVERGES"), "stdout: {stdout}");
    for name in [
        "product-unbounded-factor.gradient.csv",
        "quotient-order-zero-denominator.function.csv",
        "composition-drifting-inner.function.csv",
        "counterexamples.summary.json",
    ] {
        assert!(reports.join(name).is_file(), "missing {name}");
    }
    let quotient =
        fs::read_to_string(reports.join("quotient-order-zero-denominator.function.csv")).unwrap();
    assert!(
        quotient.lines().any(|l| l == "0.0009765625,1023"),
        "csv: {quotient}"
    );
}

#[test]
fn selftest_reports_all_checks_passing() {
    let out = bin().arg("selftest").output().unwrap();
    assert_eq!(
        out.status.code(),
        Some(0),
        "stderr: {}\nstdout: {}",
        stderr(&out),
        String::from_utf8_lossy(&out.stdout)
    );
    let stdout = String::from_utf8_lossy(&out.stdout);
    let line = stdout
        .lines()
        .find(|l| l.starts_with("selftest:"))
        .expect("summary line");
    assert!(line.contains("35/35"), "line: {line}");
}
