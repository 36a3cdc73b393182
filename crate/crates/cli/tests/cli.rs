//! End-to-end runs of the `gldp` binary: exit codes, artifact layout,
//! manifest consistency, and byte-stability across worker counts.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn gldp(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_gldp"));
    cmd.args(args);
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("spawn gldp")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("no exit code")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).to_string()
}

fn write_config(dir: &Path, v: &serde_json::Value) -> PathBuf {
    let p = dir.join("config.json");
    std::fs::write(&p, serde_json::to_string_pretty(v).unwrap()).unwrap();
    p
}

fn base_config(out: &Path) -> serde_json::Value {
    serde_json::json!({
        "preset": "flat",
        "bounds": {"sigma_lo_sq": 1.0, "sigma_hi_sq": 4.0},
        "x0": 0.0,
        "t_end": 1.0,
        "n_steps": 50,
        "n_paths": 60,
        "n_random_scenarios": 1,
        "seed": 7,
        "out_dir": out.to_str().unwrap()
    })
}

fn manifest(out: &Path) -> serde_json::Value {
    let text = std::fs::read_to_string(out.join("manifest.json")).unwrap();
    serde_json::from_str(&text).unwrap()
}

/// Every artifact the manifest lists must exist and parse in its format.
fn check_artifacts(out: &Path) {
    let m = manifest(out);
    let artifacts = m["artifacts"].as_array().unwrap();
    assert!(!artifacts.is_empty());
    for a in artifacts {
        let name = a["name"].as_str().unwrap();
        let path = out.join(name);
        assert!(path.exists(), "missing artifact {name}");
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(a["bytes"].as_u64().unwrap(), bytes.len() as u64, "{name}");
        if name.ends_with(".csv") {
            let mut rdr = csv::Reader::from_path(&path).unwrap();
            let width = rdr.headers().unwrap().len();
            for rec in rdr.records() {
                assert_eq!(rec.unwrap().len(), width, "ragged row in {name}");
            }
        } else if name.ends_with(".json") {
            let text = std::str::from_utf8(&bytes).unwrap();
            serde_json::from_str::<serde_json::Value>(text).unwrap();
        } else if name.ends_with(".svg") {
            let text = std::str::from_utf8(&bytes).unwrap();
            assert!(text.starts_with("<svg"), "{name} is not svg");
            assert!(text.trim_end().ends_with("</svg>"), "{name} truncated");
        } else {
            panic!("unexpected artifact type {name}");
        }
    }
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(code(&gldp(&["--help"], &[])), 0);
    assert_eq!(code(&gldp(&["--version"], &[])), 0);
    assert_eq!(code(&gldp(&["solve-limit", "--help"], &[])), 0);
}

#[test]
fn bad_arguments_exit_one() {
    assert_eq!(code(&gldp(&["no-such-command"], &[])), 1);
    assert_eq!(code(&gldp(&["solve-limit"], &[])), 1);
    assert_eq!(
        code(&gldp(&["solve-limit", "--config", "/definitely/not/here.json"], &[])),
        1
    );
}

#[test]
fn swapped_bounds_exit_one_and_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let mut v = base_config(&out);
    v["bounds"] = serde_json::json!({"sigma_lo_sq": 4.0, "sigma_hi_sq": 1.0});
    let cfg = write_config(dir.path(), &v);
    let run = gldp(&["solve-limit", "--config", cfg.to_str().unwrap()], &[]);
    assert_eq!(code(&run), 1);
    let msg = stderr(&run);
    assert!(msg.contains("sigma_lo_sq"), "{msg}");
}

#[test]
fn stability_violation_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let mut v = base_config(&out);
    v["n_steps"] = serde_json::json!(10);
    v["vi"] = serde_json::json!({"eps": 0.5, "nx": 801, "x_lo": -8.0, "x_hi": 8.0});
    let cfg = write_config(dir.path(), &v);
    let run = gldp(&["solve-vi", "--config", cfg.to_str().unwrap()], &[]);
    assert_eq!(code(&run), 2, "{}", stderr(&run));
    assert!(stderr(&run).contains("stability"), "{}", stderr(&run));
}

#[test]
fn solve_vi_artifacts_all_parse() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let mut v = base_config(&out);
    v["vi"] = serde_json::json!({"eps": 0.1, "nx": 41});
    let cfg = write_config(dir.path(), &v);
    let run = gldp(&["solve-vi", "--config", cfg.to_str().unwrap()], &[]);
    assert_eq!(code(&run), 0, "{}", stderr(&run));
    check_artifacts(&out);
    assert!(out.join("field.csv").exists());
    assert!(out.join("field_heatmap.svg").exists());
}

#[test]
fn simulate_forward_writes_errors_and_samples() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let mut v = base_config(&out);
    v["eps_ladder"] = serde_json::json!([0.4, 0.2, 0.1]);
    let cfg = write_config(dir.path(), &v);
    let run = gldp(&["simulate-forward", "--config", cfg.to_str().unwrap()], &[]);
    assert_eq!(code(&run), 0, "{}", stderr(&run));
    check_artifacts(&out);
    let mut rdr = csv::Reader::from_path(out.join("forward_error.csv")).unwrap();
    let rows: Vec<_> = rdr.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 3);
    // Errors shrink with the noise level.
    let errs: Vec<f64> = rows.iter().map(|r| r[1].parse().unwrap()).collect();
    assert!(errs[0] > errs[1] && errs[1] > errs[2]);
    assert!(out.join("forward_summary.json").exists());
}

#[test]
fn verify_convergence_flat_reports_second_order() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let mut v = base_config(&out);
    v["n_steps"] = serde_json::json!(200);
    v["n_paths"] = serde_json::json!(120);
    v["n_random_scenarios"] = serde_json::json!(2);
    v["eps_ladder"] = serde_json::json!([0.4, 0.2, 0.1, 0.05]);
    let cfg = write_config(dir.path(), &v);
    let run = gldp(&["verify-convergence", "--config", cfg.to_str().unwrap()], &[]);
    assert_eq!(code(&run), 0, "{}", stderr(&run));
    check_artifacts(&out);

    let mut rdr = csv::Reader::from_path(out.join("slopes.csv")).unwrap();
    let mut slope_x = None;
    let mut slope_y = None;
    for rec in rdr.records() {
        let rec = rec.unwrap();
        match &rec[1] {
            "x" => slope_x = Some(rec[2].parse::<f64>().unwrap()),
            "y" => slope_y = Some(rec[2].parse::<f64>().unwrap()),
            _ => {}
        }
    }
    let sx = slope_x.expect("x slope row");
    assert!((sx - 2.0).abs() <= 0.02, "slope_x {sx}");
    let sy = slope_y.expect("y slope row");
    assert!((sy - 2.0).abs() <= 0.1, "slope_y {sy}");

    let mut rdr = csv::Reader::from_path(out.join("errors.csv")).unwrap();
    assert_eq!(rdr.records().count(), 4);
}

#[test]
fn worker_count_does_not_change_output_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let epoch = [("SOURCE_DATE_EPOCH", "1700000000")];
    // One shared config; only --out and --workers differ between the runs.
    let mut v = base_config(dir.path());
    v["n_steps"] = serde_json::json!(100);
    v["eps_ladder"] = serde_json::json!([0.4, 0.2, 0.1]);
    v.as_object_mut().unwrap().remove("out_dir");
    let cfg = write_config(dir.path(), &v);
    let mut outs = Vec::new();
    for (tag, workers) in [("w1", "1"), ("w4", "4")] {
        let out = dir.path().join(tag);
        let run = gldp(
            &[
                "verify-convergence",
                "--config",
                cfg.to_str().unwrap(),
                "--out",
                out.to_str().unwrap(),
                "--workers",
                workers,
            ],
            &epoch,
        );
        assert_eq!(code(&run), 0, "{}", stderr(&run));
        outs.push(out);
    }
    let names = ["errors.csv", "slopes.csv", "error_curves.svg"];
    for name in names {
        let a = std::fs::read(outs[0].join(name)).unwrap();
        let b = std::fs::read(outs[1].join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between worker counts");
    }
    // Manifests agree on every artifact digest even though the recorded
    // worker count differs.
    let ma = manifest(&outs[0]);
    let mb = manifest(&outs[1]);
    assert_eq!(ma["artifacts"], mb["artifacts"]);
    assert_eq!(ma["input_digest"], mb["input_digest"]);
}

#[test]
fn rate_function_of_the_limit_path_file_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let target_path = dir.path().join("target.txt");
    let lines: Vec<String> = (0..=50).map(|_| "0.0".to_string()).collect();
    std::fs::write(&target_path, lines.join("\n")).unwrap();
    let mut v = base_config(&out);
    v["rate"] = serde_json::json!({"target_file": target_path.to_str().unwrap()});
    let cfg = write_config(dir.path(), &v);
    let run = gldp(&["rate-function", "--config", cfg.to_str().unwrap()], &[]);
    assert_eq!(code(&run), 0, "{}", stderr(&run));
    check_artifacts(&out);
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("rate.json")).unwrap()).unwrap();
    assert_eq!(doc["value"], 0.0);
    assert_eq!(doc["infinite"], false);
    // The target file counts as an input and lands in the manifest digest.
    let m = manifest(&out);
    assert_eq!(m["inputs"].as_array().unwrap().len(), 2);
}

#[test]
fn ldp_check_reports_curve_and_bound() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let mut v = base_config(&out);
    v["n_steps"] = serde_json::json!(100);
    v["n_paths"] = serde_json::json!(2000);
    v["n_random_scenarios"] = serde_json::json!(0);
    v["eps_ladder"] = serde_json::json!([1.0, 0.8]);
    v["ldp"] = serde_json::json!({"event": {"kind": "exit_ball", "delta": 3.0}});
    let cfg = write_config(dir.path(), &v);
    let run = gldp(&["ldp-check", "--config", cfg.to_str().unwrap()], &[]);
    assert_eq!(code(&run), 0, "{}", stderr(&run));
    check_artifacts(&out);
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("ldp_summary.json")).unwrap())
            .unwrap();
    let rate = doc["theoretical_rate_inf"].as_f64().unwrap();
    assert!((rate - 9.0 / 8.0).abs() <= 1e-6, "rate {rate}");
    let mut rdr = csv::Reader::from_path(out.join("ldp_curve.csv")).unwrap();
    assert_eq!(rdr.records().count(), 2);
}

#[test]
fn command_echo_mismatch_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let mut v = base_config(&out);
    v["command"] = serde_json::json!("ldp-check");
    let cfg = write_config(dir.path(), &v);
    let run = gldp(&["solve-limit", "--config", cfg.to_str().unwrap()], &[]);
    assert_eq!(code(&run), 1);
    assert!(stderr(&run).contains("subcommand"), "{}", stderr(&run));
}
