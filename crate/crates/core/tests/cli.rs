use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use psid::lmi::reference_design;

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn psid(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_psid")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn no_arguments_prints_usage() {
    let o = psid(&[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
}

#[test]
fn help_succeeds() {
    assert_eq!(psid(&["--help"]).status.code(), Some(0));
    assert_eq!(psid::cli::cli_main(["psid", "--version"]), 0);
}

#[test]
fn unknown_subcommand_and_flag() {
    assert_eq!(psid(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(psid(&["reproduce", "figures", "--bogus"]).status.code(), Some(1));
    assert_eq!(psid(&["reproduce", "table2"]).status.code(), Some(1));
}

#[test]
fn missing_config_is_a_validation_error() {
    assert_eq!(psid::cli::cli_main(["psid", "design", "/nonexistent/cfg.toml"]), 1);
}

#[test]
fn design_prints_certificate() {
    let cfg = config("heatrod.toml");
    let o = psid(&["design", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let s = stdout(&o);
    assert!(s.contains("lambda_max(Xi)"));
    assert!(s.contains("eta"));
    assert!(s.trim_end().ends_with("PASS"), "{s}");
}

#[test]
fn design_with_pinned_reference_gains() {
    let cfg = config("heatrod_pinned.toml");
    let o = psid(&["design", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("-8.586"));
}

#[test]
fn failing_certificate_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let pin = dir.path().join("bad.toml");
    let mut bad = reference_design();
    bad.p = -bad.p;
    bad.save(&pin).unwrap();
    let cfg = config("heatrod.toml");
    let o = psid(&["design", cfg.to_str().unwrap(), "--pin-gains", pin.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).contains("FAIL"));
}

#[test]
fn pinned_gains_of_wrong_size_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("window.toml");
    let pin = config("reference_gains.toml");
    let out = dir.path().to_str().unwrap();
    let o = psid(&["identify", cfg.to_str().unwrap(), "--pin-gains", pin.to_str().unwrap(), "--out", out]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn bad_grid_override_is_a_validation_error() {
    let cfg = config("heatrod.toml");
    let dir = tempfile::tempdir().unwrap();
    let o = psid(&["simulate", cfg.to_str().unwrap(), "--nodes", "200", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn simulate_writes_state_and_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("heatrod.toml");
    let o = psid(&["simulate", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap(), "--dt", "0.05"]);
    assert_eq!(o.status.code(), Some(0));
    let y = std::fs::read_to_string(dir.path().join("y.csv")).unwrap();
    assert_eq!(y.lines().next(), Some("t,y1,y2"));
    assert_eq!(y.lines().count(), 1 + 1601);
    assert!(dir.path().join("x.csv").exists());
}

#[test]
fn identify_writes_all_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("heatrod_pinned.toml");
    let o = psid(&["identify", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    for f in ["y.csv", "yhat.csv", "fs_vs_fshat.csv", "ef_field.csv", "report.csv", "gains.toml"] {
        assert!(dir.path().join(f).exists(), "{f} missing");
    }
    let ef = std::fs::read_to_string(dir.path().join("ef_field.csv")).unwrap();
    let header: Vec<&str> = ef.lines().next().unwrap().split(',').collect();
    assert_eq!(header.len(), 1 + 201);
    assert_eq!(header[0], "t");
}

#[test]
fn reproduce_table1_writes_six_rows() {
    let dir = tempfile::tempdir().unwrap();
    let o = psid(&["reproduce", "table1", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(dir.path().join("table1.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "m,n_y,gamma,rmse,ideal_rmse,lambda_max_xi,status");
    assert_eq!(lines.len(), 7);
    for (m, n_y) in [(2, 2), (2, 3), (3, 3), (2, 4), (3, 4), (4, 4)] {
        assert!(dir.path().join(format!("m{m}_ny{n_y}")).join("report.csv").exists());
    }
}

#[test]
fn reproduce_table1_rejects_pinned_gains() {
    let pin = config("reference_gains.toml");
    let dir = tempfile::tempdir().unwrap();
    let code = psid::cli::cli_main([
        "psid",
        "reproduce",
        "table1",
        "--pin-gains",
        pin.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code, 1);
}
