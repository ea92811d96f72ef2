use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ris_edge::ao::{scaling_law_experiment, ScalingParams};
use ris_edge::learning::dbm_to_watts;

fn scenarios() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios")
}

fn ris_edge(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ris-edge")).args(args).output().unwrap()
}

fn small_config(dir: &Path) -> PathBuf {
    let path = dir.join("small.json");
    fs::write(
        &path,
        r#"{
  "system": {"antennas": 4, "ris_elements": 10, "users": 3},
  "experiment": {"seed": 5, "trials": 3}
}
"#,
    )
    .unwrap();
    path
}

#[test]
fn solve_is_reproducible_across_job_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let out = ris_edge(&["solve", "--config", cfg.to_str().unwrap(), "--out", a.to_str().unwrap(), "--jobs", "1"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out = ris_edge(&["solve", "--config", cfg.to_str().unwrap(), "--out", b.to_str().unwrap(), "--jobs", "3"]);
    assert!(out.status.success());
    for f in ["summary.csv", "traces.csv", "els_trace.csv", "results.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f} differs");
    }
}

#[test]
fn solve_trace_is_monotone() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out_dir = dir.path().join("o");
    assert!(ris_edge(&["solve", "--config", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap()])
        .status
        .success());
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("results.json")).unwrap()).unwrap();
    let trials = json["trials"].as_array().unwrap();
    assert_eq!(trials.len(), 3);
    for t in trials {
        let trace = t["solution"]["trace"].as_array().unwrap();
        let obj: Vec<f64> = trace.iter().map(|r| r["objective"].as_f64().unwrap()).collect();
        assert!(obj.windows(2).all(|w| w[1] <= w[0] + 1e-9));
        assert!(t["solution"].get("wall_time_s").is_none());
    }
}

#[test]
fn timing_flag_records_wall_time() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out_dir = dir.path().join("o");
    let out = ris_edge(&[
        "solve",
        "--config",
        cfg.to_str().unwrap(),
        "--trials",
        "1",
        "--timing",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("results.json")).unwrap()).unwrap();
    assert!(json["trials"][0]["solution"]["wall_time_s"].as_f64().unwrap() >= 0.0);
}

#[test]
fn csv_values_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out_dir = dir.path().join("o");
    assert!(ris_edge(&[
        "solve",
        "--config",
        cfg.to_str().unwrap(),
        "--trials",
        "1",
        "--out",
        out_dir.to_str().unwrap()
    ])
    .status
    .success());
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("results.json")).unwrap()).unwrap();
    let trace = json["trials"][0]["solution"]["trace"].as_array().unwrap();
    let mut reader = csv::Reader::from_path(out_dir.join("traces.csv")).unwrap();
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), trace.len());
    for (row, rec) in rows.iter().zip(trace) {
        let obj: f64 = row[4].parse().unwrap();
        let expect = rec["objective"].as_f64().unwrap();
        assert!((obj - expect).abs() <= 1e-12 * expect);
    }
    let summary = fs::read_to_string(out_dir.join("summary.csv")).unwrap();
    assert!(!summary.contains('\r'));
}

#[test]
fn convergence_writes_admm_trace() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out_dir = dir.path().join("o");
    assert!(ris_edge(&[
        "convergence",
        "--config",
        cfg.to_str().unwrap(),
        "--trials",
        "1",
        "--out",
        out_dir.to_str().unwrap()
    ])
    .status
    .success());
    let admm = fs::read_to_string(out_dir.join("admm_trace.csv")).unwrap();
    assert!(admm.starts_with("antennas,trial,ao_iter,els_step,iter,primal_residual,feasible,sinr_1,sinr_2,sinr_3\n"));
    assert!(admm.lines().count() > 1);
}

#[test]
fn benchmark_summarizes_every_scheme() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bench.json");
    fs::write(
        &cfg,
        r#"{"system": {"ris_elements": 8, "users": 2}, "experiment": {"trials": 2, "antenna_sweep": [2, 4]}}"#,
    )
    .unwrap();
    let out_dir = dir.path().join("o");
    let out = ris_edge(&["benchmark", "--config", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let mut reader = csv::Reader::from_path(out_dir.join("summary.csv")).unwrap();
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 8);
    let schemes: Vec<&str> = rows.iter().map(|r| &r[0]).collect();
    for s in ["proposed", "no_ris", "random_phase", "sum_rate"] {
        assert!(schemes.contains(&s));
    }
}

#[test]
fn scaling_matches_library() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("scaling.json");
    fs::write(&cfg, r#"{"scaling": {"ris_sizes": [16, 32, 64], "trials": 500}, "experiment": {"seed": 4}}"#).unwrap();
    let out_dir = dir.path().join("o");
    assert!(ris_edge(&["scaling", "--config", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap()])
        .status
        .success());
    let params = ScalingParams { power: 0.1, noise: dbm_to_watts(-77.0), rho_h2: 1.0, rho_g2: 1.0 };
    let expect = scaling_law_experiment(&[16, 32, 64], 500, &params, 4).unwrap();
    let mut reader = csv::Reader::from_path(out_dir.join("summary.csv")).unwrap();
    for (row, p) in reader.records().map(Result::unwrap).zip(&expect) {
        assert_eq!(row[0].parse::<usize>().unwrap(), p.m);
        assert_eq!(row[1].parse::<f64>().unwrap(), p.mean_snr);
    }
}

#[test]
fn fit_demo_recovers_parameters() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scenarios().join("fit_demo.json");
    let out = ris_edge(&["fit", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("results.json")).unwrap()).unwrap();
    assert!((json["c"].as_f64().unwrap() - 10.79).abs() < 1e-6);
    assert!((json["d"].as_f64().unwrap() - 0.73).abs() < 1e-6);
}

#[test]
fn fit_rejects_single_row() {
    let dir = tempfile::tempdir().unwrap();
    let pts = dir.path().join("one.csv");
    fs::write(&pts, "100,0.5\n").unwrap();
    let out = ris_edge(&["fit", "--points", pts.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn fit_reports_malformed_row() {
    let dir = tempfile::tempdir().unwrap();
    let pts = dir.path().join("bad.csv");
    fs::write(&pts, "sample_size,test_error\n100,0.5\n200\n").unwrap();
    let out = ris_edge(&["fit", "--points", pts.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains(":3:") || err.contains("row 3"), "{err}");
}

#[test]
fn bad_config_exits_2_with_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, "{\n  \"system\": {\n    \"bandwidth_hz\": -5\n  }\n}\n").unwrap();
    let out = ris_edge(&["solve", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bad.json:3"), "{err}");

    fs::write(&cfg, "{\n  \"solver\": {\"rho\": 1.0,\n  \"ao_tolerance\": 1e-3}\n}\n").unwrap();
    let out = ris_edge(&["solve", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad.json:3"));
}

#[test]
fn bad_flags_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().to_str().unwrap();
    assert_eq!(ris_edge(&["solve", "--trials", "0", "--out", out_dir]).status.code(), Some(2));
    assert_eq!(ris_edge(&["solve", "--els-tol", "2", "--out", out_dir]).status.code(), Some(2));
    assert_eq!(ris_edge(&["solve", "--jobs", "0", "--out", out_dir]).status.code(), Some(2));
    assert_eq!(ris_edge(&["solve", "--config", "/nonexistent/x.json", "--out", out_dir]).status.code(), Some(2));
    assert_eq!(ris_edge(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn solver_failure_exits_3() {
    // A 4000 dB reference loss underflows every channel gain to zero, which
    // parses fine but leaves nothing for the solver to work with.
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("degenerate.json");
    fs::write(&cfg, r#"{"system": {"antennas": 2, "ris_elements": 2, "users": 1}, "geometry": {"ref_loss_db": 4000}}"#)
        .unwrap();
    let out = ris_edge(&["solve", "--config", cfg.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("o/results.json")).unwrap()).unwrap();
    assert!(json["trials"][0]["error"].is_string());
}

#[test]
fn shipped_presets_parse() {
    for name in ["default", "convergence", "benchmark", "scaling", "fit_demo"] {
        let path = scenarios().join(format!("{name}.json"));
        ris_edge::config::RunConfig::load(&path, &Default::default()).unwrap_or_else(|e| panic!("{e}"));
    }
}
