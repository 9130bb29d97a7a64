use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};

fn beamsynth(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_beamsynth"))
        .args(args)
        .env_remove("BEAMSYNTH_THREADS")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

/// 8 x 8 array, coarse grid: solves in well under a second.
fn small_config(dir: &Path, alpha: Option<f64>) -> String {
    let mut cfg = json!({
        "array": { "elements_x": 8, "elements_y": 8, "spacing_wavelengths": 0.5 },
        "design": {
            "beamwidth_deg": 30,
            "sidelobe_edge_deg": 30,
            "grid_step_deg": 1.0,
            "snr_min_db": 0
        },
        "solver": { "init": "chirp" }
    });
    if let Some(a) = alpha {
        cfg["design"]["alpha"] = json!(a);
    }
    let path = dir.join("small.json");
    std::fs::write(&path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn schema_is_json() {
    let out = beamsynth(&["schema"]);
    assert_eq!(code(&out), 0);
    let schema = stdout_json(&out);
    assert!(schema["properties"]["design"].is_object());
}

#[test]
fn geometry_and_capacity_defaults() {
    let out = beamsynth(&["geometry"]);
    assert_eq!(code(&out), 0);
    let g = stdout_json(&out);
    assert!((g["fov_angle_deg"].as_f64().unwrap() - 67.0).abs() < 0.01);

    let out = beamsynth(&["capacity"]);
    assert_eq!(code(&out), 0);
    let c = stdout_json(&out);
    let counts: Vec<u64> = c["rows"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["n_min"].as_u64().unwrap())
        .collect();
    assert_eq!(counts, [9, 60, 105]);
}

#[test]
fn capacity_writes_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = beamsynth(&["capacity", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    assert!(dir.path().join("capacity.json").exists());
    let csv = std::fs::read_to_string(dir.path().join("capacity.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
}

#[test]
fn malformed_config_reports_position() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(
        &path,
        "{\n  \"design\": {\n    \"beamwidth_deg\": ,\n  }\n}\n",
    )
    .unwrap();
    let out = beamsynth(&["geometry", "--config", path.to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 3"), "{err}");
    assert_eq!(err.matches("configuration error").count(), 1, "{err}");
}

#[test]
fn unknown_field_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("typo.json");
    std::fs::write(&path, r#"{ "design": { "beamwidth": 10 } }"#).unwrap();
    let out = beamsynth(&["geometry", "--config", path.to_str().unwrap()]);
    assert_eq!(code(&out), 1);
}

#[test]
fn bad_init_and_threads_rejected() {
    let out = beamsynth(&["design", "--init", "random"]);
    assert_eq!(code(&out), 1);

    let out = Command::new(env!("CARGO_BIN_EXE_beamsynth"))
        .arg("schema")
        .env("BEAMSYNTH_THREADS", "0")
        .output()
        .unwrap();
    assert_eq!(code(&out), 1);
}

#[test]
fn infeasible_floor_exits_3() {
    // The 10 deg floor (about 180) exceeds what 8 elements can deliver (64).
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("inf.json");
    std::fs::write(
        &path,
        r#"{ "array": { "elements_x": 8, "elements_y": 8 }, "design": { "grid_step_deg": 1.0 } }"#,
    )
    .unwrap();
    let out = beamsynth(&[
        "design",
        "--config",
        path.to_str().unwrap(),
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn iteration_limit_exits_2_with_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), Some(10.0));
    let out_dir = dir.path().join("o");
    let out = beamsynth(&[
        "design",
        "--config",
        &cfg,
        "--init",
        "zero",
        "--max-iter",
        "1",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 2, "{}", String::from_utf8_lossy(&out.stderr));
    let report: Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("solve_report.json")).unwrap())
            .unwrap();
    assert_eq!(report["converged"], json!(false));
    assert!(out_dir.join("coefficients_x.csv").exists());
    assert!(!out_dir.join("coefficients_w.csv").exists());
}

#[test]
fn design_then_evaluate_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), Some(10.0));
    let out_dir = dir.path().join("o");
    let out = beamsynth(&[
        "design",
        "--config",
        &cfg,
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let designed = stdout_json(&out);
    for f in [
        "solve_report.json",
        "metrics.json",
        "coefficients_x.csv",
        "coefficients_y.csv",
        "coefficients_w.csv",
        "mask.csv",
        "pattern_x.csv",
        "pattern_y.csv",
        "pattern_ura.csv",
    ] {
        assert!(out_dir.join(f).exists(), "missing {f}");
    }
    let eta = designed["eta_cmc"].as_f64().unwrap();
    assert!((eta - 1.0).abs() < 1e-3, "eta {eta}");

    let w = out_dir.join("coefficients_w.csv");
    let out = beamsynth(&["evaluate", w.to_str().unwrap(), "--config", &cfg]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let evaluated = stdout_json(&out);
    for key in [
        "npsl_ula_db",
        "npsl_ura_db",
        "snr_svc_db",
        "p_r_oob_dbm",
        "eta_cmc",
    ] {
        let (a, b) = (
            designed[key].as_f64().unwrap(),
            evaluated[key].as_f64().unwrap(),
        );
        assert!(
            (a - b).abs() <= 1e-9 * a.abs().max(1.0),
            "{key}: {a} vs {b}"
        );
    }

    let text = std::fs::read_to_string(&w).unwrap();
    let truncated: String = text.lines().take(20).map(|l| format!("{l}\n")).collect();
    let bad = dir.path().join("truncated.csv");
    std::fs::write(&bad, truncated).unwrap();
    let out = beamsynth(&["evaluate", bad.to_str().unwrap(), "--config", &cfg]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("dimension mismatch"));
}
