//! End-to-end checks of the ruinsim binary: exit codes, output files, and
//! flag overrides.

use std::path::PathBuf;
use std::process::{Command, Output};

fn ruinsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ruinsim"))
        .args(args)
        .output()
        .expect("ruinsim spawns")
}

fn repo_config(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name)
}

#[test]
fn version_prints_and_exits_zero() {
    let out = ruinsim(&["version"]);
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains(env!("CARGO_PKG_VERSION")), "{stdout}");
}

#[test]
fn unknown_subcommand_exits_one() {
    let out = ruinsim(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn run_constants_writes_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = ruinsim(&[
        "run",
        repo_config("constants.toml").to_str().unwrap(),
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap())
            .unwrap();
    assert!((summary["result"]["kappa"].as_f64().unwrap() - 0.5).abs() < 1e-9);
    assert!((summary["result"]["infinite_factor"].as_f64().unwrap() - 0.75).abs() < 1e-9);
    assert_eq!(summary["seed"], 42);
}

#[test]
fn invalid_model_exits_two_citing_the_constraint() {
    let dir = tempfile::tempdir().unwrap();
    let spec = r#"
seed = 1
workers = 1

[model]
theta = 1.2

[model.f]
alpha = 2.0
x_m = 1.0

[model.g]
family = "uniform"
b = 1.0

[task]
kind = "constants"
"#;
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, spec).unwrap();
    let out = ruinsim(&[
        "run",
        path.to_str().unwrap(),
        "--out-dir",
        dir.path().join("out").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("1 + θ φ₁(x) φ₂(y) ≥ 0"), "stderr: {stderr}");

    // validate prints the report and exits 2 as well.
    let out = ruinsim(&["validate", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let report: serde_json::Value =
        serde_json::from_str(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(report["positivity_margin"].as_f64().unwrap(), 1.0 - 1.2);
}

#[test]
fn validate_accepts_config_a() {
    let out = ruinsim(&["validate", repo_config("constants.toml").to_str().unwrap()]);
    assert!(out.status.success());
}

#[test]
fn hypothesis_violation_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let spec = r#"
seed = 1
workers = 1

[model]
theta = 1.0

[model.f]
alpha = 2.0
x_m = 1.0

[model.g]
family = "uniform"
b = 2.0

[task]
kind = "ruin-infinite"
x_grid = [100.0]
n_samples = 1000
tail_tol = 0.01
"#;
    let path = dir.path().join("heavy.toml");
    std::fs::write(&path, spec).unwrap();
    let out = ruinsim(&[
        "run",
        path.to_str().unwrap(),
        "--out-dir",
        dir.path().join("out").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3));
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("E[Y^α] < 1"), "stderr: {stderr}");
}

#[test]
fn malformed_spec_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("broken.toml");
    std::fs::write(&path, "this is not toml = [").unwrap();
    let out = ruinsim(&["run", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_spec_file_exits_one() {
    let out = ruinsim(&["run", "/nonexistent/exp.toml"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn seed_override_changes_mc_output_and_runs_never_mutate_the_spec() {
    let dir = tempfile::tempdir().unwrap();
    let spec_path = repo_config("product_tail_mc.toml");
    let spec_before = std::fs::read(&spec_path).unwrap();
    let run_with_seed = |seed: &str, sub: &str| {
        let out_dir = dir.path().join(sub);
        let out = ruinsim(&[
            "run",
            spec_path.to_str().unwrap(),
            "--seed",
            seed,
            "--workers",
            "2",
            "--out-dir",
            out_dir.to_str().unwrap(),
        ]);
        assert!(
            out.status.success(),
            "stderr: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        std::fs::read(out_dir.join("curve.csv")).unwrap()
    };
    let a = run_with_seed("7", "a");
    let b = run_with_seed("7", "b");
    let c = run_with_seed("8", "c");
    assert_eq!(a, b);
    assert_ne!(a, c);
    assert_eq!(std::fs::read(&spec_path).unwrap(), spec_before);
}

#[test]
fn dz_check_task_produces_report_json() {
    let dir = tempfile::tempdir().unwrap();
    let out = ruinsim(&[
        "run",
        repo_config("dz_check.toml").to_str().unwrap(),
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["result"]["report"]["l_form"], "(i)");
    assert_eq!(summary["result"]["report"]["dz1"]["verdict"], "pass");
}
