//! End-to-end tests of the `beamqopt` binary: pipeline round trips,
//! validation failures, exit codes, and output determinism.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_beamqopt"))
}

fn run(args: &[&str], dir: &Path) -> Output {
    bin()
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn assert_success(out: &Output) {
    assert!(
        out.status.success(),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn temp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("beamqopt-cli-{tag}-{}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn generate_small(dir: &Path, seed: u64, out: &str) {
    let out = run(
        &[
            "generate",
            "--profile",
            "uniform",
            "--flows",
            "2",
            "--units",
            "2",
            "--beams",
            "2",
            "--volume-max",
            "2",
            "--rate-max",
            "1",
            "--seed",
            &seed.to_string(),
            "--out",
            out,
        ],
        dir,
    );
    assert_success(&out);
}

#[test]
fn generate_build_solve_round_trip() {
    let dir = temp_dir("roundtrip");
    generate_small(&dir, 7, "s.json");
    let out = run(&["build", "--scenario", "s.json", "--out", "q.qubo"], &dir);
    assert_success(&out);
    assert!(dir.join("q.qubo").exists());
    assert!(dir.join("q.qubo.index.json").exists());

    let out = run(
        &[
            "solve",
            "--scenario",
            "s.json",
            "--qubo",
            "q.qubo",
            "--solver",
            "exact",
            "--out-dir",
            "exact",
        ],
        &dir,
    );
    assert_success(&out);
    let result: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("exact/result.json")).unwrap()).unwrap();
    assert_eq!(result["optimal"], serde_json::Value::Bool(true));
    assert!(dir.join("exact/schedule.txt").exists());
    assert!(dir.join("exact/feasibility.json").exists());
}

#[test]
fn generate_is_deterministic_per_seed() {
    let dir = temp_dir("gen-determinism");
    generate_small(&dir, 11, "a.json");
    generate_small(&dir, 11, "b.json");
    generate_small(&dir, 12, "c.json");
    let a = fs::read(dir.join("a.json")).unwrap();
    let b = fs::read(dir.join("b.json")).unwrap();
    let c = fs::read(dir.join("c.json")).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn generate_rejects_zero_flows() {
    let dir = temp_dir("gen-zero");
    let out = run(
        &[
            "generate",
            "--profile",
            "uniform",
            "--flows",
            "0",
            "--units",
            "2",
            "--beams",
            "2",
            "--out",
            "s.json",
        ],
        &dir,
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(!String::from_utf8_lossy(&out.stderr).is_empty());
}

#[test]
fn build_fails_on_missing_scenario() {
    let dir = temp_dir("build-missing");
    let out = run(
        &["build", "--scenario", "nope.json", "--out", "q.qubo"],
        &dir,
    );
    assert!(!out.status.success());
}

/// 2 flows, 2 units in one slot, P/dp = 2 and C/dq = 2 everywhere:
/// 4 decision + 2 power slack + 2 + 2 queue slack = 10 qubits.
fn ten_bit_scenario() -> serde_json::Value {
    serde_json::json!({
        "flows": [
            {"id": 0, "weight": 1.0, "queue_capacity": 2.0, "rates": {"0": 1.0, "1": 1.0}},
            {"id": 1, "weight": 2.0, "queue_capacity": 2.0, "rates": {"0": 1.0, "1": 1.0}}
        ],
        "units": [
            {"id": 0, "beam": 0, "frequency": 0, "slot": 0, "power_required": 1.0},
            {"id": 1, "beam": 1, "frequency": 0, "slot": 0, "power_required": 1.0}
        ],
        "power_limits": {"0": 2.0},
        "dq": 1.0,
        "dp": 1.0,
        "rng_seed": 0
    })
}

#[test]
fn build_reports_slack_bit_breakdown() {
    let dir = temp_dir("build-breakdown");
    fs::write(dir.join("s.json"), ten_bit_scenario().to_string()).unwrap();
    let out = run(&["build", "--scenario", "s.json", "--out", "q.qubo"], &dir);
    assert_success(&out);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(
        stdout.contains("qubits: 10 = 4 decision + 2 power slack + 4 queue slack"),
        "stdout: {stdout}"
    );
}

#[test]
fn build_rescale_shrinks_queue_slack() {
    let dir = temp_dir("build-rescale");
    let mut scenario = ten_bit_scenario();
    scenario["flows"][0]["queue_capacity"] = serde_json::json!(1000.0);
    scenario["flows"][1]["queue_capacity"] = serde_json::json!(1000.0);
    fs::write(dir.join("s.json"), scenario.to_string()).unwrap();

    let out = run(
        &["build", "--scenario", "s.json", "--out", "big.qubo"],
        &dir,
    );
    assert_success(&out);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(
        stdout.contains("flow 0: 10 queue slack bits"),
        "stdout: {stdout}"
    );

    let out = run(
        &[
            "build",
            "--scenario",
            "s.json",
            "--rescale",
            "500",
            "--out",
            "small.qubo",
        ],
        &dir,
    );
    assert_success(&out);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(
        stdout.contains("flow 0: 2 queue slack bits"),
        "stdout: {stdout}"
    );
}

#[test]
fn qaoa_trace_has_iters_rows_and_monotone_energy() {
    let dir = temp_dir("qaoa-trace");
    generate_small(&dir, 1, "s.json");
    assert_success(&run(
        &["build", "--scenario", "s.json", "--out", "q.qubo"],
        &dir,
    ));
    let out = run(
        &[
            "solve",
            "--scenario",
            "s.json",
            "--qubo",
            "q.qubo",
            "--solver",
            "qaoa",
            "--layers",
            "1",
            "--iters",
            "200",
            "--exact-expectation",
            "--seed",
            "1",
            "--out-dir",
            "out",
        ],
        &dir,
    );
    assert_success(&out);
    let trace = fs::read_to_string(dir.join("out/trace.csv")).unwrap();
    let rows: Vec<&str> = trace.lines().skip(1).collect();
    assert_eq!(rows.len(), 200);
    let energies: Vec<f64> = rows
        .iter()
        .map(|r| r.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    for pair in energies.windows(2) {
        assert!(pair[1] <= pair[0], "trace energy increased");
    }
    assert!(dir.join("out/histogram.csv").exists());
    assert!(dir.join("out/hamming_profile.csv").exists());
}

#[test]
fn layerwise_depth_summary_is_non_increasing() {
    let dir = temp_dir("layerwise");
    generate_small(&dir, 2, "s.json");
    assert_success(&run(
        &["build", "--scenario", "s.json", "--out", "q.qubo"],
        &dir,
    ));
    let out = run(
        &[
            "solve",
            "--scenario",
            "s.json",
            "--qubo",
            "q.qubo",
            "--solver",
            "layerwise",
            "--layers",
            "3",
            "--iters",
            "60",
            "--exact-expectation",
            "--seed",
            "4",
            "--out-dir",
            "out",
        ],
        &dir,
    );
    assert_success(&out);

    // Last trace row of each depth is that depth's best energy.
    let trace = fs::read_to_string(dir.join("out/trace.csv")).unwrap();
    let mut best_per_depth: Vec<(usize, f64)> = Vec::new();
    for row in trace.lines().skip(1) {
        let fields: Vec<&str> = row.split(',').collect();
        let energy: f64 = fields[1].parse().unwrap();
        let depth: usize = fields[3].parse().unwrap();
        match best_per_depth.last_mut() {
            Some((d, e)) if *d == depth => *e = energy,
            _ => best_per_depth.push((depth, energy)),
        }
    }
    assert_eq!(best_per_depth.len(), 3);
    for pair in best_per_depth.windows(2) {
        assert!(pair[1].1 <= pair[0].1 + 1e-12, "{best_per_depth:?}");
    }

    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("depth 1: best energy"));
    assert!(stdout.contains("depth 3: best energy"));
}

#[test]
fn verify_passes_default_lambdas() {
    let dir = temp_dir("verify-ok");
    for seed in [3u64, 5] {
        let s = format!("s{seed}.json");
        let q = format!("q{seed}.qubo");
        generate_small(&dir, seed, &s);
        assert_success(&run(&["build", "--scenario", &s, "--out", &q], &dir));
        let out = run(&["verify", "--scenario", &s, "--qubo", &q], &dir);
        assert_success(&out);
        assert!(String::from_utf8_lossy(&out.stdout).contains("ok:"));
    }
}

#[test]
fn verify_fails_with_tiny_lambdas() {
    let dir = temp_dir("verify-bad");
    // Two flows contending for one high-value unit; with negligible
    // penalties the double assignment wins the energy race.
    let scenario = serde_json::json!({
        "flows": [
            {"id": 0, "weight": 1.0, "queue_capacity": 5.0, "rates": {"0": 5.0}},
            {"id": 1, "weight": 1.0, "queue_capacity": 5.0, "rates": {"0": 5.0}}
        ],
        "units": [
            {"id": 0, "beam": 0, "frequency": 0, "slot": 0, "power_required": 1.0}
        ],
        "power_limits": {"0": 1.0},
        "dq": 1.0,
        "dp": 1.0,
        "rng_seed": 0
    });
    fs::write(dir.join("s.json"), scenario.to_string()).unwrap();
    let out = run(
        &[
            "build",
            "--scenario",
            "s.json",
            "--lambda1",
            "0.01",
            "--lambda2",
            "0.01",
            "--lambda3",
            "0.01",
            "--out",
            "q.qubo",
        ],
        &dir,
    );
    assert_success(&out);
    let out = run(
        &["verify", "--scenario", "s.json", "--qubo", "q.qubo"],
        &dir,
    );
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn verify_rejects_oversized_models() {
    let dir = temp_dir("verify-cap");
    let out = run(
        &[
            "generate",
            "--profile",
            "uniform",
            "--flows",
            "4",
            "--units",
            "4",
            "--beams",
            "2",
            "--seed",
            "1",
            "--out",
            "s.json",
        ],
        &dir,
    );
    assert_success(&out);
    assert_success(&run(
        &["build", "--scenario", "s.json", "--out", "q.qubo"],
        &dir,
    ));
    let out = run(
        &["verify", "--scenario", "s.json", "--qubo", "q.qubo"],
        &dir,
    );
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn quantum_solver_requires_qubo_flag() {
    let dir = temp_dir("no-qubo");
    generate_small(&dir, 1, "s.json");
    let out = run(
        &[
            "solve",
            "--scenario",
            "s.json",
            "--solver",
            "qaoa",
            "--out-dir",
            "out",
        ],
        &dir,
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn qubit_cap_env_var_is_honored() {
    let dir = temp_dir("env-cap");
    generate_small(&dir, 1, "s.json");
    assert_success(&run(
        &["build", "--scenario", "s.json", "--out", "q.qubo"],
        &dir,
    ));
    let out = bin()
        .args([
            "solve",
            "--scenario",
            "s.json",
            "--qubo",
            "q.qubo",
            "--solver",
            "qaoa",
            "--iters",
            "5",
            "--exact-expectation",
            "--out-dir",
            "out",
        ])
        .current_dir(&dir)
        .env("BEAMQOPT_MAX_QUBITS", "3")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("cap is 3"), "stderr: {stderr}");
}

#[test]
fn repeats_fan_out_per_seed_outputs() {
    let dir = temp_dir("repeats");
    generate_small(&dir, 3, "s.json");
    assert_success(&run(
        &["build", "--scenario", "s.json", "--out", "q.qubo"],
        &dir,
    ));
    let out = run(
        &[
            "solve",
            "--scenario",
            "s.json",
            "--qubo",
            "q.qubo",
            "--solver",
            "qaoa",
            "--iters",
            "20",
            "--exact-expectation",
            "--seed",
            "5",
            "--repeats",
            "2",
            "--out-dir",
            "out",
        ],
        &dir,
    );
    assert_success(&out);
    assert!(dir.join("out/trace_seed5.csv").exists());
    assert!(dir.join("out/trace_seed6.csv").exists());
    assert!(dir.join("out/result_seed6.json").exists());
}

#[test]
fn sampled_mode_pipeline_is_deterministic() {
    let dir = temp_dir("sampled-determinism");
    generate_small(&dir, 9, "s.json");
    assert_success(&run(
        &["build", "--scenario", "s.json", "--out", "q.qubo"],
        &dir,
    ));
    for out_dir in ["a", "b"] {
        let out = run(
            &[
                "solve",
                "--scenario",
                "s.json",
                "--qubo",
                "q.qubo",
                "--solver",
                "qaoa",
                "--iters",
                "40",
                "--shots",
                "256",
                "--seed",
                "2",
                "--out-dir",
                out_dir,
            ],
            &dir,
        );
        assert_success(&out);
    }
    for file in ["trace.csv", "histogram.csv", "hamming_profile.csv"] {
        let a = fs::read(dir.join("a").join(file)).unwrap();
        let b = fs::read(dir.join("b").join(file)).unwrap();
        assert_eq!(a, b, "{file} differs between identical runs");
    }
}
