use std::path::Path;
use std::process::{Command, Output};

fn flowbox(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_flowbox"))
        .args(args)
        .env("FLOWBOX_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn out_arg(dir: &Path) -> String {
    dir.to_str().unwrap().to_string()
}

#[test]
fn unknown_system_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = flowbox(&["chart", "build", "--system", "no-such", "--grid", "0x1,0x1x3", "--out", &out_arg(dir.path())]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(flowbox(&["bogus-command"]).status.code(), Some(1));
}

#[test]
fn rotation_chart_fails_audit() {
    let dir = tempfile::tempdir().unwrap();
    let o = flowbox(&[
        "chart", "build", "--system", "rotation-c", "--surface", "segment:0.1,0,2,0", "--grid", "-1x1,-1x1x5",
        "--out", &out_arg(dir.path()),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("more than once"));
    assert!(dir.path().join("audit.json").exists());
    assert!(!dir.path().join("chart.csv").exists());
}

#[test]
fn hyperbolic_chart_point_on_surface() {
    let dir = tempfile::tempdir().unwrap();
    let o = flowbox(&["chart", "build", "--system", "hyperbolic-b", "--grid", "1x1x1,0.5x0.5x1", "--out", &out_arg(dir.path())]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("chart.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("x1,x2,h1,m,status"));
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    let h: f64 = row[2].parse().unwrap();
    let m: f64 = row[3].parse().unwrap();
    assert!((h - 0.525).abs() < 1e-9);
    assert_eq!(m, 0.0);
    assert_eq!(row[4], "ok");
}

#[test]
fn kef_check_pass_and_fail() {
    let dir = tempfile::tempdir().unwrap();
    let out = out_arg(dir.path());
    let pass = flowbox(&["kef", "check", "--system", "hyperbolic-b", "--phi", "x1*x2", "--lambda", "0", "--grid", "0.5x2,0.5x2x4", "--out", &out]);
    assert_eq!(pass.status.code(), Some(0), "{}", String::from_utf8_lossy(&pass.stderr));
    let fail = flowbox(&["kef", "check", "--system", "appendix", "--phi", "x2", "--lambda", "2", "--grid", "0.5x2,0.5x2x4", "--out", &out]);
    assert_eq!(fail.status.code(), Some(2));
    assert!(dir.path().join("residuals.csv").exists());
    assert!(dir.path().join("manifest.json").exists());
}

#[test]
fn singular_patch_is_numerical_failure() {
    let dir = tempfile::tempdir().unwrap();
    let o = flowbox(&["varfit", "--system", "linear-ar", "--grid", "2.5x3,2.5x3x16", "--out", &out_arg(dir.path())]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("nearly parallel"));
}

#[test]
fn replay_reproduces_orbit() {
    let dir = tempfile::tempdir().unwrap();
    let out = out_arg(dir.path());
    let o = flowbox(&["orbit", "--system", "limit-cycle", "--x0", "0.5,0", "--t", "3", "--out", &out]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let manifest = dir.path().join("manifest.json");
    let r = flowbox(&["replay", manifest.to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(0), "{}", String::from_utf8_lossy(&r.stdout));
    assert!(String::from_utf8_lossy(&r.stdout).contains("identical"));
}

#[test]
fn verify_swapped_convention_fails() {
    let dir = tempfile::tempdir().unwrap();
    let out = out_arg(dir.path());
    assert_eq!(flowbox(&["verify", "--out", &out]).status.code(), Some(0));
    assert_eq!(flowbox(&["verify", "--arg-convention", "swapped", "--out", &out]).status.code(), Some(2));
}
