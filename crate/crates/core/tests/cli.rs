// SPDX-License-Identifier: MIT OR Apache-2.0

use std::path::Path;
use std::process::{Command, Output};

fn fdcov(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fdcov"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn simulate(path: &Path, design: &[&str], seed: &str) -> Output {
    let mut args = vec!["simulate"];
    args.extend_from_slice(design);
    args.extend_from_slice(&["--seed", seed, "--out", path.to_str().unwrap()]);
    fdcov(&args)
}

const SMALL_WHITE: [&str; 10] = ["--design", "white", "--n", "12", "--T", "10", "--p", "6", "--L", "0"];

#[test]
fn simulate_is_byte_identical_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b, c) = (dir.path().join("a.fdt"), dir.path().join("b.fdt"), dir.path().join("c.fdt"));
    assert_eq!(simulate(&a, &SMALL_WHITE, "5").status.code(), Some(0));
    assert_eq!(simulate(&b, &SMALL_WHITE, "5").status.code(), Some(0));
    assert_eq!(simulate(&c, &SMALL_WHITE, "6").status.code(), Some(0));
    let (ba, bb, bc) = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap(), std::fs::read(&c).unwrap());
    assert_eq!(ba, bb);
    assert_ne!(ba, bc);
    let spec: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("a.fdt.spec.json")).unwrap()).unwrap();
    assert_eq!(spec["design"], "white");
    assert_eq!(spec["seed"], 5);
}

#[test]
fn simulate_single_change_has_requested_shape() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.fdt");
    let out = simulate(
        &path,
        &["--design", "single_change", "--n", "40", "--T", "50", "--p", "500", "--delta", "0.05"],
        "1",
    );
    assert_eq!(out.status.code(), Some(0));
    let sample = fdcov::data::load_sample(&path).unwrap();
    assert_eq!((sample.n(), sample.t(), sample.p()), (40, 50, 500));
}

#[test]
fn simulate_rejects_negative_lag() {
    let dir = tempfile::tempdir().unwrap();
    let out = simulate(
        &dir.path().join("x.fdt"),
        &["--design", "white", "--n", "5", "--T", "4", "--p", "2", "--L", "-1"],
        "1",
    );
    assert_eq!(out.status.code(), Some(3));
    assert!(out.stdout.is_empty());
    assert!(!out.stderr.is_empty());
}

#[test]
fn missing_input_is_exit_2() {
    let out = fdcov(&["detect", "/nonexistent/path.fdt"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(out.stdout.is_empty());
}

#[test]
fn usage_and_config_errors_are_exit_3() {
    assert_eq!(fdcov(&["bench", "--suite", "nope"]).status.code(), Some(3));
    assert_eq!(fdcov(&["detect"]).status.code(), Some(3));
    assert_eq!(fdcov(&["detect", "x.fdt", "--alpha", "1.5"]).status.code(), Some(3));
    assert_eq!(fdcov(&["detect", "x.fdt", "--mc-reps", "10"]).status.code(), Some(3));
    assert_eq!(fdcov(&["--help"]).status.code(), Some(0));
}

#[test]
fn identify_min_segment_above_t_is_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("w.fdt");
    assert_eq!(simulate(&path, &SMALL_WHITE, "2").status.code(), Some(0));
    let out = fdcov(&["identify", path.to_str().unwrap(), "--min-segment", "20"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn detect_writes_report_and_sidecars() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("w.fdt");
    assert_eq!(simulate(&path, &SMALL_WHITE, "3").status.code(), Some(0));
    let out_dir = dir.path().join("report");
    let out = fdcov(&[
        "detect",
        path.to_str().unwrap(),
        "--seed",
        "17",
        "--mc-reps",
        "2000",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    for key in ["m_n", "argmax_t", "critical_value", "p_value", "reject", "quantile_mode", "quantile_seed", "config"] {
        assert!(report.get(key).is_some(), "missing {key}");
    }
    assert_eq!(report["config"]["seed"], 17);
    assert_eq!(report["config"]["mc_reps"], 2000);
    for f in ["detect.json", "process.csv", "correlation.csv", "correlation.mask.csv"] {
        assert!(out_dir.join(f).exists(), "missing {f}");
    }
    let csv = std::fs::read_to_string(out_dir.join("process.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 9);
}

#[test]
fn embedded_config_reproduces_report() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("w.fdt");
    assert_eq!(simulate(&path, &SMALL_WHITE, "4").status.code(), Some(0));
    let first = fdcov(&[
        "identify",
        path.to_str().unwrap(),
        "--seed",
        "99",
        "--alpha",
        "0.2",
        "--mc-reps",
        "500",
        "--min-segment",
        "4",
    ]);
    assert_eq!(first.status.code(), Some(0));
    let report_path = dir.path().join("first.json");
    std::fs::write(&report_path, &first.stdout).unwrap();
    let second = fdcov(&["identify", path.to_str().unwrap(), "--config", report_path.to_str().unwrap()]);
    assert_eq!(second.status.code(), Some(0));
    assert_eq!(first.stdout, second.stdout);
}

#[test]
fn flat_config_file_and_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("w.fdt");
    assert_eq!(simulate(&path, &SMALL_WHITE, "4").status.code(), Some(0));
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# detection settings\nalpha = 0.1\nmc-reps = 300\nseed = 8\n").unwrap();
    let out = fdcov(&["detect", path.to_str().unwrap(), "--config", cfg.to_str().unwrap(), "--seed", "9"]);
    assert_eq!(out.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["config"]["alpha"], 0.1);
    assert_eq!(report["config"]["mc_reps"], 300);
    assert_eq!(report["config"]["seed"], 9);
}

#[test]
fn thread_count_does_not_change_report() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("w.fdt");
    assert_eq!(simulate(&path, &SMALL_WHITE, "6").status.code(), Some(0));
    let run = |threads: &str| {
        let out = fdcov(&["identify", path.to_str().unwrap(), "--min-segment", "4", "--mc-reps", "500", "--threads", threads]);
        assert_eq!(out.status.code(), Some(0));
        out.stdout
    };
    assert_eq!(run("1"), run("4"));
}

#[test]
fn bench_writes_json_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = fdcov(&[
        "bench",
        "--suite",
        "size",
        "--replicates",
        "2",
        "--mc-reps",
        "200",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["suite"], "size");
    assert_eq!(report["grid"]["replicates"], 2);
    assert!(dir.path().join("size.json").exists());
    assert!(dir.path().join("size.csv").exists());
}
