//! End-to-end runs of the binary.

use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_rs-hierarchy"));
    c.env_remove("RS_HIERARCHY_PROFILE");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

#[test]
fn flow_export_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let paths = [dir.path().join("a.csv"), dir.path().join("b.csv")];
    for p in &paths {
        let out = run(&[
            "flow",
            "--n",
            "3",
            "--k",
            "2",
            "--steps",
            "40",
            "--seed",
            "7",
            "--out",
            p.to_str().unwrap(),
        ]);
        assert_eq!(
            out.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    let (a, b) = (
        std::fs::read(&paths[0]).unwrap(),
        std::fs::read(&paths[1]).unwrap(),
    );
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "t,q_1,q_2,q_3,h_1,h_2,h_3,gauge_defect"
    );
    assert_eq!(lines.count(), 41);
}

#[test]
fn conserved_columns_stay_constant() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("t.csv");
    let out = run(&[
        "flow",
        "--n",
        "4",
        "--k",
        "3",
        "--steps",
        "100",
        "--seed",
        "2",
        "--out",
        p.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(&p).unwrap();
    let rows: Vec<Vec<f64>> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    for row in &rows {
        for c in 5..9 {
            let h0 = rows[0][c];
            assert!((row[c] - h0).abs() <= 1e-10 * (1.0 + h0.abs()));
        }
    }
}

#[test]
fn check_writes_report_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("r.json");
    let out = run(&[
        "check",
        "--suite",
        "theorem1",
        "--n",
        "3",
        "--seeds",
        "10",
        "--out",
        p.to_str().unwrap(),
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report: Value = serde_json::from_str(&std::fs::read_to_string(&p).unwrap()).unwrap();
    assert_eq!(report["all_pass"], Value::Bool(true));
    let checks = report["checks"].as_array().unwrap();
    assert_eq!(checks.len(), 5);
    for c in checks {
        assert_eq!(c["seeds"].as_array().unwrap().len(), 10);
        assert!(c["max_rel_defect"].as_f64().unwrap() <= c["tolerance"].as_f64().unwrap());
    }
}

#[test]
fn strict_profile_fails_fd_checks_with_exit_one() {
    let out = run(&[
        "check",
        "--suite",
        "prop3",
        "--n",
        "2",
        "--seeds",
        "1",
        "--profile",
        "strict",
    ]);
    assert_eq!(out.status.code(), Some(1));
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["all_pass"], Value::Bool(false));
}

#[test]
fn environment_overrides_profile() {
    let out = bin()
        .args([
            "check",
            "--suite",
            "prop3",
            "--n",
            "2",
            "--seeds",
            "1",
            "--profile",
            "strict",
        ])
        .env("RS_HIERARCHY_PROFILE", "default")
        .output()
        .unwrap();
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(report["checks"]
        .as_array()
        .unwrap()
        .iter()
        .all(|c| c["profile"] == "default"));

    let bad = bin()
        .args(["check", "--suite", "flows", "--seeds", "1"])
        .env("RS_HIERARCHY_PROFILE", "loose")
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn bracket_prints_one_value() {
    let out = run(&[
        "bracket", "--chart", "red", "--which", "2", "--f", "1,1,re", "--h", "2,1,im", "--seed",
        "1",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 1);
    let v: f64 = text.trim().parse().unwrap();
    assert!(v.is_finite());

    // H_1 and H_2 commute under both brackets
    for which in ["1", "2"] {
        let out = run(&[
            "bracket", "--chart", "full", "--which", which, "--f", "0,1,re", "--h", "0,2,re",
            "--seed", "4",
        ]);
        let v: f64 = String::from_utf8(out.stdout)
            .unwrap()
            .trim()
            .parse()
            .unwrap();
        assert!(v.abs() < 1e-9, "bracket {which}: {v}");
    }
}

#[test]
fn configuration_errors_exit_two() {
    let cases: &[&[&str]] = &[
        &[
            "bracket", "--chart", "rs", "--which", "1", "--f", "1,1,re", "--h", "1,2,re",
        ],
        &[
            "bracket", "--chart", "suth", "--which", "2", "--f", "1,1,re", "--h", "1,2,re",
        ],
        &[
            "bracket", "--chart", "moon", "--which", "1", "--f", "1,1,re", "--h", "1,2,re",
        ],
        &[
            "bracket", "--chart", "red", "--which", "3", "--f", "1,1,re", "--h", "1,2,re",
        ],
        &[
            "bracket", "--chart", "red", "--which", "1", "--f", "1,1", "--h", "1,2,re",
        ],
        &["check", "--suite", "nonexistent"],
        &["check", "--suite", "flows", "--n", "1"],
        &["check", "--suite", "flows", "--seeds", "0"],
        &["flow", "--k", "0", "--out", "/dev/null"],
    ];
    for args in cases {
        assert_eq!(run(args).status.code(), Some(2), "{args:?}");
    }
}
