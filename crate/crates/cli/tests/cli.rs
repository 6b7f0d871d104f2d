//! Smoke tests of the `sindy` binary: config runs, output files, inspect.

use std::fs;
use std::process::Command;

fn sindy() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sindy"))
}

const CONFIG: &str = r#"{
  "id": "cli-smoke",
  "system": { "name": "lorenz", "sigma": 10.0, "rho": 28.0, "beta": 2.6666666666666665 },
  "ident_x0": [-8.0, 8.0, 27.0],
  "recon_x0": [1.0, 1.0, 1.0],
  "dt": 0.01,
  "t_end": 4.0,
  "recon_t_end": 2.0,
  "derivative_source": { "kind": "measured_noisy", "sigma": 0.0 },
  "objective": { "kind": "l2", "threshold": 0.1 },
  "dictionary_degree": 2,
  "seeds": { "noise_seed": 1, "solver_seed": 2 },
  "replicates": 1
}"#;

#[test]
fn run_config_then_inspect() {
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("scenario.json");
    fs::write(&config_path, CONFIG).unwrap();
    let out_dir = dir.path().join("out");

    let output = sindy()
        .args(["run", "--config"])
        .arg(&config_path)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(
        output.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&output.stderr)
    );

    let records = fs::read_to_string(out_dir.join("records.csv")).unwrap();
    assert!(records.starts_with("scenario_id,objective,replicate"));
    assert_eq!(records.lines().count(), 2);

    let coeffs_path = out_dir.join("coeffs_cli-smoke_r0.json");
    assert!(coeffs_path.exists());

    let output = sindy()
        .args(["inspect", "--coeffs"])
        .arg(&coeffs_path)
        .output()
        .unwrap();
    assert!(output.status.success());
    let text = String::from_utf8_lossy(&output.stdout);
    assert!(text.contains("dx/dt = -10*x + 10*y"), "{text}");
    assert!(text.contains("dz/dt"), "{text}");
}

#[test]
fn run_requires_exactly_one_source() {
    let output = sindy().args(["run", "--out", "/tmp/nowhere"]).output().unwrap();
    assert!(!output.status.success());

    let output = sindy()
        .args([
            "run", "--table", "1", "--config", "x.json", "--out", "/tmp/nowhere",
        ])
        .output()
        .unwrap();
    assert!(!output.status.success());
}

#[test]
fn rejects_out_of_range_table() {
    let output = sindy()
        .args(["run", "--table", "9", "--out", "/tmp/nowhere"])
        .output()
        .unwrap();
    assert!(!output.status.success());
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("9"), "{stderr}");
}

#[test]
fn inspect_missing_file_fails_with_context() {
    let output = sindy()
        .args(["inspect", "--coeffs", "/definitely/not/here.json"])
        .output()
        .unwrap();
    assert!(!output.status.success());
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("here.json"), "{stderr}");
}
