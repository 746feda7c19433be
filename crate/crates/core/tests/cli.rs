//! Exit codes and output formats of the `kldcov` binary.

use std::path::Path;
use std::process::{Command, Output};

fn kldcov(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kldcov"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap()
}

fn write(dir: &Path, name: &str, text: &str) {
    std::fs::write(dir.join(name), text).unwrap();
}

fn setup() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    write(p, "x.csv", "a,g\n0.1,u\n0.9,v\n1.7,u\n2.2,v\n3.1,u\n3.3,v\n");
    write(p, "y.csv", "a,g\n0.35,u\n1.45,v\n2.05,u\n2.95,v\n4.1,u\n");
    write(
        p,
        "schema.json",
        r#"[{"name": "a", "kind": "continuous"}, {"name": "g", "kind": "discrete"}]"#,
    );
    dir
}

#[test]
fn estimate_prints_one_row_with_full_precision() {
    let dir = setup();
    let out = kldcov(dir.path(), &["estimate", "x.csv", "y.csv", "--schema", "schema.json"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "kl_estimate,ci_lower,ci_upper,alpha,n,m,d,b_x,b_y,failures");
    let fields: Vec<&str> = lines[1].split(',').collect();
    let v: f64 = fields[0].parse().unwrap();
    assert!(v.is_finite());
    assert_eq!(&fields[4..7], ["6", "5", "2"]);
}

#[test]
fn configuration_errors_exit_with_one() {
    let dir = setup();
    let p = dir.path();
    write(p, "bad.json", r#"{"experiment": "eval", "data": {"path": "missing.csv"}}"#);
    write(p, "typo.json", r#"{"experiment": "evaluate"}"#);
    for args in [
        &["estimate", "nope.csv", "y.csv"][..],
        &["estimate", "x.csv", "y.csv", "--schema", "schema.json", "--ci", "--alpha", "1.5"],
        &["fit-sample", "x.csv", "--model", "vine", "--out", "s.csv"],
        &["experiment", "bad.json"],
        &["experiment", "typo.json"],
        &["benchmark", "typo.json"],
        &["no-such-command"],
    ] {
        let out = kldcov(p, args);
        assert_eq!(out.status.code(), Some(1), "{:?}: {}", args, String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn estimation_failures_exit_with_two() {
    let dir = setup();
    let p = dir.path();
    // y has no row in stratum v, so the divergence is infinite
    write(p, "y_only_u.csv", "a,g\n0.35,u\n2.05,u\n4.1,u\n");
    let out = kldcov(p, &["estimate", "x.csv", "y_only_u.csv", "--schema", "schema.json"]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    write(p, "dup.csv", "a,g\n0.1,u\n0.1,u\n1.0,v\n");
    let out = kldcov(p, &["estimate", "dup.csv", "y.csv", "--schema", "schema.json"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn fit_sample_writes_requested_rows() {
    let dir = setup();
    let p = dir.path();
    let out = kldcov(
        p,
        &["fit-sample", "x.csv", "--model", "indepcop", "--m", "40", "--seed", "2", "--out", "s.csv"],
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(p.join("s.csv")).unwrap();
    assert_eq!(text.lines().next(), Some("a,g"));
    assert_eq!(text.lines().count(), 41);
}

#[test]
fn help_exits_with_zero() {
    let dir = setup();
    assert_eq!(kldcov(dir.path(), &["--help"]).status.code(), Some(0));
}
