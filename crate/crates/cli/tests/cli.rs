//! End-to-end tests of the `modalflow` binary: exit codes, manifests,
//! and byte-identical reruns.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_modalflow")
}

fn temp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("modalflow-cli-{tag}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

fn run(args: &[&str], cwd: &Path) -> Output {
    Command::new(bin())
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

const TRINE: &str = r#"
experiment = "trine_static"
seed = 42
output_dir = "out"

[params]
count = 5000
dt = 0.01
t_max = 0.5
"#;

#[test]
fn trine_run_succeeds_and_is_reproducible() {
    let dir = temp_dir("trine");
    let cfg = write_config(&dir, "c.toml", TRINE);
    let out = run(&["run", cfg.to_str().unwrap()], &dir);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("out/manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["status"], "ok");
    assert_eq!(manifest["seed"], 42);
    assert!(manifest["outputs"]
        .as_array()
        .unwrap()
        .iter()
        .any(|o| o == "ensemble.csv"));

    let first = std::fs::read(dir.join("out/ensemble.csv")).unwrap();
    let out2 = run(
        &["run", cfg.to_str().unwrap(), "--set", "output_dir=\"out2\""],
        &dir,
    );
    assert!(out2.status.success());
    let second = std::fs::read(dir.join("out2/ensemble.csv")).unwrap();
    assert_eq!(first, second, "same config and seed must be byte-identical");

    // A different seed changes the realization.
    let out3 = run(
        &[
            "run",
            cfg.to_str().unwrap(),
            "--set",
            "output_dir=\"out3\"",
            "--set",
            "seed=43",
        ],
        &dir,
    );
    assert!(out3.status.success());
    let third = std::fs::read(dir.join("out3/ensemble.csv")).unwrap();
    assert_ne!(first, third);
}

#[test]
fn results_are_independent_of_thread_count() {
    let dir = temp_dir("threads");
    let cfg = write_config(&dir, "c.toml", TRINE);
    let mut single = Command::new(bin());
    single
        .args(["run", cfg.to_str().unwrap()])
        .env("MODALFLOW_THREADS", "1")
        .current_dir(&dir);
    assert!(single.output().unwrap().status.success());
    let one = std::fs::read(dir.join("out/ensemble.csv")).unwrap();

    let mut multi = Command::new(bin());
    multi
        .args(["run", cfg.to_str().unwrap(), "--set", "output_dir=\"outm\""])
        .env("MODALFLOW_THREADS", "4")
        .current_dir(&dir);
    assert!(multi.output().unwrap().status.success());
    let many = std::fs::read(dir.join("outm/ensemble.csv")).unwrap();
    assert_eq!(one, many);
}

#[test]
fn config_errors_exit_2() {
    let dir = temp_dir("config");
    // Missing mandatory seed.
    let cfg = write_config(
        &dir,
        "bad.toml",
        "experiment = \"trine_static\"\noutput_dir = \"out\"\n",
    );
    let out = run(&["run", cfg.to_str().unwrap()], &dir);
    assert_eq!(out.status.code(), Some(2));

    // Unknown field via --set.
    let cfg = write_config(&dir, "c.toml", TRINE);
    let out = run(
        &["run", cfg.to_str().unwrap(), "--set", "params.bogus=1"],
        &dir,
    );
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bogus"), "diagnostic names the field: {err}");
}

#[test]
fn numeric_failures_exit_3_with_manifest() {
    let dir = temp_dir("numeric");
    // A number-state phase trajectory started at the Husimi zero.
    let cfg = write_config(
        &dir,
        "c.toml",
        r#"
experiment = "husimi_oscillator"
seed = 1
output_dir = "out"

[params]
n = 1
alpha0_re = 0.0
alpha0_im = 0.0
t_max = 1.0
dt = 0.05
"#,
    );
    let out = run(&["run", cfg.to_str().unwrap()], &dir);
    assert_eq!(out.status.code(), Some(3));
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("out/manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["status"], "numeric_error");
    assert!(manifest["error"].as_str().unwrap().contains("Husimi"));
}

#[test]
fn husimi_run_records_closed_form_residual() {
    let dir = temp_dir("husimi");
    let cfg = write_config(
        &dir,
        "c.toml",
        r#"
experiment = "husimi_oscillator"
seed = 1
output_dir = "out"

[params]
n = 1
alpha0_re = 1.0
t_max = 20.0
dt = 0.1
"#,
    );
    let out = run(&["run", cfg.to_str().unwrap()], &dir);
    assert!(out.status.success());
    let csv = std::fs::read_to_string(dir.join("out/trajectory.csv")).unwrap();
    assert!(csv.starts_with("t,alpha_re,alpha_im,source\n"));
    assert!(csv.contains("closed_form"));
    assert!(csv.contains("numeric"));
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("out/manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["checks"][0]["passed"], true);
}

#[test]
fn verify_passes_and_is_deterministic() {
    let dir = temp_dir("verify");
    let a = run(&["verify", "--seed", "1"], &dir);
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    let b = run(&["verify", "--seed", "1"], &dir);
    assert_eq!(a.stdout, b.stdout, "same seed, identical report bytes");
    let text = String::from_utf8_lossy(&a.stdout);
    for suite in ["hilbert", "jump", "naimark", "bohm", "oscillator"] {
        assert!(text.contains(&format!("suite {suite}: PASS")), "{text}");
    }
}
