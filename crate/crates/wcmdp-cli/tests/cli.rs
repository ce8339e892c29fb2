//! End-to-end CLI checks: generate an instance, inspect it with every
//! subcommand, and confirm failures exit nonzero with a machine-readable
//! report.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_wcmdp"))
}

fn workdir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join("wcmdp-cli-tests").join(name);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn run_ok(cmd: &mut Command) -> Output {
    let output = cmd.output().expect("spawn wcmdp");
    assert!(
        output.status.success(),
        "command failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr)
    );
    output
}

fn generate(dir: &Path, machines: usize) -> PathBuf {
    let path = dir.join(format!("instance-{machines}.json"));
    run_ok(bin().args([
        "generate-instance",
        "--machines",
        &machines.to_string(),
        "--preset",
        "exponential-rccc",
        "--seed",
        "0",
        "--out",
        path.to_str().unwrap(),
    ]));
    path
}

#[test]
fn generate_whittle_and_evaluate() {
    let dir = workdir("basic");
    let instance = generate(&dir, 3);

    let whittle = run_ok(bin().args(["whittle", "--instance", instance.to_str().unwrap()]));
    let table = String::from_utf8(whittle.stdout).unwrap();
    let mut lines = table.lines();
    assert_eq!(lines.next().unwrap(), "state,index,indexable");
    let indices: Vec<f64> = lines
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(indices.len(), 3);
    assert!(indices[0] < indices[1] && indices[1] < indices[2]);

    let report = dir.join("report.csv");
    run_ok(bin().args([
        "evaluate",
        "--instance",
        instance.to_str().unwrap(),
        "--policy",
        "wip",
        "--trajectories",
        "100",
        "--horizon",
        "50",
        "--out",
        report.to_str().unwrap(),
    ]));
    let text = std::fs::read_to_string(&report).unwrap();
    assert!(text.starts_with("policy,N,S,budget,ggf_score,mean_value,stderr,seconds"));
    assert_eq!(text.lines().count(), 2);
}

#[test]
fn train_checkpoint_then_evaluate_it() {
    let dir = workdir("train");
    let instance = generate(&dir, 2);
    let checkpoint = dir.join("ckpt.json");
    let curve = dir.join("curve.csv");
    run_ok(bin().args([
        "train-cpdrl",
        "--instance",
        instance.to_str().unwrap(),
        "--episodes",
        "20",
        "--steps-per-episode",
        "30",
        "--eval-every",
        "10",
        "--eval-rollouts",
        "10",
        "--out",
        checkpoint.to_str().unwrap(),
        "--curve",
        curve.to_str().unwrap(),
    ]));
    let curve_text = std::fs::read_to_string(&curve).unwrap();
    assert!(curve_text.starts_with("episode,eval_ggf,stderr"));
    assert_eq!(curve_text.lines().count(), 3); // header + 2 points

    let report = dir.join("cpdrl.csv");
    run_ok(bin().args([
        "evaluate",
        "--instance",
        instance.to_str().unwrap(),
        "--policy",
        &format!("cpdrl:{}", checkpoint.display()),
        "--trajectories",
        "50",
        "--horizon",
        "40",
        "--out",
        report.to_str().unwrap(),
    ]));
    assert!(std::fs::read_to_string(&report).unwrap().lines().count() == 2);
}

#[test]
fn multitask_flag_parses_and_trains() {
    let dir = workdir("multitask");
    let instance = generate(&dir, 2);
    let checkpoint = dir.join("mt.json");
    run_ok(bin().args([
        "train-cpdrl",
        "--instance",
        instance.to_str().unwrap(),
        "--multitask",
        "3:1,4:1",
        "--episodes",
        "12",
        "--steps-per-episode",
        "20",
        "--eval-every",
        "100",
        "--eval-rollouts",
        "5",
        "--out",
        checkpoint.to_str().unwrap(),
    ]));
    assert!(checkpoint.exists());
}

#[test]
fn experiment_e4_writes_csv() {
    let dir = workdir("experiment");
    let config = dir.join("config.json");
    std::fs::write(&config, r#"{"machines": [2, 3], "e4_joint_solve_max": 3}"#).unwrap();
    run_ok(bin().args([
        "experiment",
        "e4",
        "--config",
        config.to_str().unwrap(),
        "--out",
        dir.to_str().unwrap(),
    ]));
    let csv = std::fs::read_to_string(dir.join("e4-efficiency.csv")).unwrap();
    assert!(csv.contains("ggf-lp,2,13,31"));
    assert!(csv.contains("ggf-lp,3,36,114"));
    assert!(csv.contains("count-dual-lp,2,6,"));
}

#[test]
fn export_mps_produces_fixed_format() {
    let dir = workdir("mps");
    let instance = generate(&dir, 2);
    let out = dir.join("model.mps");
    run_ok(bin().args([
        "export-mps",
        "--instance",
        instance.to_str().unwrap(),
        "--model",
        "ggf",
        "--out",
        out.to_str().unwrap(),
    ]));
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.contains("NAME"));
    assert!(text.trim_end().ends_with("ENDATA"));
}

#[test]
fn failures_exit_nonzero_with_json_report() {
    let dir = workdir("errors");
    let missing = dir.join("does-not-exist.json");
    let output = bin()
        .args(["whittle", "--instance", missing.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(!output.status.success());
    let stderr = String::from_utf8(output.stderr).unwrap();
    let report: serde_json::Value =
        serde_json::from_str(stderr.lines().last().unwrap()).expect("stderr is JSON");
    assert_eq!(report["status"], "error");
    assert!(!report["error"].as_str().unwrap().is_empty());
}

#[test]
fn loader_rejects_drifted_probability_rows() {
    let dir = workdir("drift");
    let instance = generate(&dir, 2);
    let mut value: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&instance).unwrap()).unwrap();
    value["transition"][0][0][0] = serde_json::json!(0.9001);
    let bad = dir.join("bad.json");
    std::fs::write(&bad, serde_json::to_string(&value).unwrap()).unwrap();
    let output = bin()
        .args(["whittle", "--instance", bad.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(!output.status.success());
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("drift"), "stderr: {stderr}");
}
