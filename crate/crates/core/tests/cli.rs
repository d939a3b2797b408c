use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn hudtrust(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hudtrust"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn missing_scenario_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nowhere.toml");
    let out = hudtrust(&[
        "simulate",
        "--scenario",
        arg(&missing),
        "--out",
        arg(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("nowhere.toml"), "{err}");
}

#[test]
fn malformed_features_name_row_and_column() {
    let dir = tempfile::tempdir().unwrap();
    let features = dir.path().join("features.csv");
    fs::write(
        &features,
        "subject,group,event,dP2P,dMax,dMean,dAcc\n1,OMN,Dog,0.1,0.2,0.3,0.4\n2,SEL,Dog,oops,0.2,0.3,0.4\n",
    )
    .unwrap();
    let out = hudtrust(&[
        "analyze",
        "--features",
        arg(&features),
        "--out",
        arg(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("row 3") && err.contains("dP2P"), "{err}");
}

#[test]
fn unknown_policy_is_rejected() {
    let out = hudtrust(&["simulate", "--policy", "ALL"]);
    assert!(!out.status.success());
}

#[test]
fn cohort_then_analyze() {
    let dir = tempfile::tempdir().unwrap();
    let out = hudtrust(&["cohort", "--seed", "3", "--out", arg(dir.path())]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let features = dir.path().join("features.csv");
    let text = fs::read_to_string(&features).unwrap();
    assert_eq!(text.lines().count(), 1 + 30 * 7);
    for name in ["ratings.csv", "markers.csv"] {
        assert!(dir.path().join(name).is_file(), "{name}");
    }

    let report_dir = dir.path().join("report");
    let ratings = dir.path().join("ratings.csv");
    let out = hudtrust(&[
        "analyze",
        "--features",
        arg(&features),
        "--ratings",
        arg(&ratings),
        "--out",
        arg(&report_dir),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = fs::read_to_string(report_dir.join("report.csv")).unwrap();
    assert!(csv.starts_with("effect,statistic,df,p,adjusted_p"));
    assert!(report_dir.join("report.txt").is_file());
}
