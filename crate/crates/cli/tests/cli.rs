use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use gradband_core::gittins::GittinsTable;
use tempfile::TempDir;

const SMALL: &str = r#"
name = "small"
horizon = 50

[prior]
arms = 2

[prior.family]
kind = "mixture_points"
points = [[0.7, 0.3], [0.3, 0.7]]
weights = [0.5, 0.5]

[prior.reward]
kind = "bernoulli"

[policy]
kind = "soft_elim"
w = 1.0

[train]
iterations = 3
batch_size = 40
seed = 7
eval_every = 1
eval_instances = 50

[eval]
instances = 200
seed = 11
"#;

fn gradband(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gradband")).args(args).env("GRADBAND_THREADS", "1").output().unwrap()
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("experiment.toml");
    std::fs::write(&path, text).unwrap();
    path
}

/// The single run directory under `<out>/<name>`.
fn single_run(out: &Path, name: &str) -> PathBuf {
    let runs: Vec<_> = std::fs::read_dir(out.join(name)).unwrap().map(|e| e.unwrap().path()).collect();
    assert_eq!(runs.len(), 1, "{runs:?}");
    runs.into_iter().next().unwrap()
}

fn run_ok(args: &[&str]) -> String {
    let out = gradband(args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn stdout_dir(stdout: &str) -> PathBuf {
    PathBuf::from(stdout.lines().last().unwrap())
}

#[test]
fn zero_iterations_leave_the_parameters_unchanged() {
    let tmp = TempDir::new().unwrap();
    let config = write_config(tmp.path(), &SMALL.replace("iterations = 3", "iterations = 0"));
    let out = tmp.path().join("out");
    run_ok(&["train", "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    let dir = single_run(&out, "small");
    for file in ["trace.csv", "params.json", "eval.csv", "manifest.json"] {
        assert!(dir.join(file).is_file(), "{file}");
    }
    let params: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.join("params.json")).unwrap()).unwrap();
    assert_eq!(params["params"], serde_json::json!([1.0]));
    assert_eq!(params["params"], params["initial_params"]);
}

#[test]
fn reruns_write_identical_traces() {
    let tmp = TempDir::new().unwrap();
    let config = write_config(tmp.path(), SMALL);
    let out = tmp.path().join("out");
    let args = ["train", "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()];
    let first = stdout_dir(&run_ok(&args));
    let second = stdout_dir(&run_ok(&args));
    assert_ne!(first, second);
    let a = std::fs::read(first.join("trace.csv")).unwrap();
    let b = std::fs::read(second.join("trace.csv")).unwrap();
    assert_eq!(a, b);
    assert_eq!(String::from_utf8(a).unwrap().lines().count(), 5);
    assert_eq!(std::fs::read(first.join("eval.csv")).unwrap(), std::fs::read(second.join("eval.csv")).unwrap());
}

#[test]
fn manifest_records_hash_and_seed_override() {
    let tmp = TempDir::new().unwrap();
    let config = write_config(tmp.path(), SMALL);
    let out = tmp.path().join("out");
    run_ok(&["train", "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap(), "--seed", "99"]);
    let dir = single_run(&out, "small");
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["train_seed"], 99);
    assert_eq!(manifest["eval_seed"], 99);
    assert_eq!(manifest["threads"], 1);
    assert_eq!(manifest["config_sha256"].as_str().unwrap().len(), 64);
    assert_eq!(manifest["config"]["train"]["seed"], 99);
}

#[test]
fn malformed_config_exits_2_with_the_line() {
    let tmp = TempDir::new().unwrap();
    let config = write_config(tmp.path(), &SMALL.replace("horizon = 50", "horizon = = 50"));
    let out = gradband(&["train", "--config", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("line 3"), "{stderr}");
}

#[test]
fn invalid_settings_exit_2() {
    let tmp = TempDir::new().unwrap();
    for bad in [
        SMALL.replace("batch_size = 40", "batch_size = 40\nbatchsize = 3"),
        SMALL.replace("w = 1.0", "w = -1.0"),
        SMALL.replace("kind = \"mixture_points\"", "kind = \"dataset_backed\"\npath = \"missing.csv\""),
    ] {
        let config = write_config(tmp.path(), &bad);
        let out = gradband(&["train", "--config", config.to_str().unwrap(), "--out", tmp.path().to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn runtime_failures_exit_3() {
    let tmp = TempDir::new().unwrap();
    let config = write_config(tmp.path(), SMALL);
    let blocker = tmp.path().join("not_a_dir");
    std::fs::write(&blocker, "").unwrap();
    let out = gradband(&["eval", "--config", config.to_str().unwrap(), "--out", blocker.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn uniform_policy_on_a_zero_gap_prior_has_no_regret() {
    let tmp = TempDir::new().unwrap();
    let text = SMALL
        .replace("points = [[0.7, 0.3], [0.3, 0.7]]", "points = [[0.5, 0.5]]")
        .replace("weights = [0.5, 0.5]", "weights = [1.0]")
        .replace("kind = \"soft_elim\"\nw = 1.0", "kind = \"uniform\"");
    let config = write_config(tmp.path(), &text);
    let out = tmp.path().join("out");
    run_ok(&["eval", "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    let csv = std::fs::read_to_string(single_run(&out, "small").join("eval.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("policy,prior,n,instances,regret_mean,regret_stderr"));
    let fields: Vec<&str> = lines.next().unwrap().split(',').collect();
    let (mean, stderr): (f64, f64) = (fields[4].parse().unwrap(), fields[5].parse().unwrap());
    assert!(mean.abs() <= 3.0 * stderr.max(1e-12), "{mean} ± {stderr}");
}

#[test]
fn prior_sweep_writes_a_square_matrix() {
    let tmp = TempDir::new().unwrap();
    let text = format!("{SMALL}\n[sweep]\naxis = \"prior_param\"\ngrid = [2.0, 5.0, 8.0]\n").replace("eval_every = 1\n", "");
    let config = write_config(tmp.path(), &text);
    let out = tmp.path().join("out");
    run_ok(&["sweep", "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    let dir = single_run(&out, "small");
    let matrix = std::fs::read_to_string(dir.join("sweep.csv")).unwrap();
    let rows: Vec<Vec<&str>> = matrix.lines().map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 4);
    assert_eq!(rows[0], ["train_value", "eval_2", "eval_5", "eval_8"]);
    for row in &rows[1..] {
        assert_eq!(row.len(), 4);
        assert!(row[1..].iter().all(|v| v.parse::<f64>().unwrap().is_finite()));
    }
    assert!(!matrix.contains('\r'));
}

#[test]
fn gittins_single_round_cache() {
    let tmp = TempDir::new().unwrap();
    let cache = tmp.path().join("g1.bin");
    let stdout = run_ok(&["gittins", "--n", "1", "--cache", cache.to_str().unwrap()]);
    assert!(stdout.contains("lattice size 1"), "{stdout}");
    let table = GittinsTable::load(&cache).unwrap();
    assert_eq!(table.lattice_size(), 1);
    assert_eq!(table.index(1, 1, 1), 0.5);
}

#[test]
fn unwritable_gittins_cache_exits_4() {
    let tmp = TempDir::new().unwrap();
    let cache = tmp.path().join("missing").join("g.bin");
    let out = gradband(&["gittins", "--n", "3", "--cache", cache.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn registry_is_listed() {
    let stdout = run_ok(&["list"]);
    for name in ["mixture2", "bernoulli10", "beta2", "beta10", "problem1", "problem4", "multiclass_csv"] {
        assert!(stdout.lines().any(|l| l == name), "{name}");
    }
}
