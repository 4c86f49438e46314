use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_conelab"))
}

fn sample_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/sample.json")
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("config.json");
    std::fs::write(&path, body).unwrap();
    path
}

fn stdout_str(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

/// Fast config: two cheap campaigns, small ensemble.
const QUICK: &str = r#"{"seed": 11, "experiments": ["steinweiss", "convergence", "square_scaling"], "ensemble": 8}"#;

#[test]
fn missing_config_exits_one_with_diagnostic() {
    let out = bin().args(["run", "/nonexistent/config.json"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(!out.stderr.is_empty());
    assert!(out.stdout.is_empty());
}

#[test]
fn malformed_config_exits_one() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), r#"{"seed": 3, "nope": 1}"#);
    let out = bin()
        .args(["run", cfg.to_str().unwrap(), "--out", tmp.path().join("r").to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(!out.stderr.is_empty());
}

#[test]
fn sample_config_smoke_run() {
    let tmp = tempfile::tempdir().unwrap();
    let store = tmp.path().join("results");
    let out = bin()
        .args(["run", sample_config().to_str().unwrap(), "--out", store.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let run_id = stdout_str(&out).lines().next().unwrap().to_string();
    let dir = store.join(&run_id);
    assert!(dir.join("manifest.json").is_file());
    assert!(dir.join("config.json").is_file());
    let csvs: Vec<_> = std::fs::read_dir(&dir)
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_name().to_string_lossy().ends_with(".csv"))
        .collect();
    assert_eq!(csvs.len(), 8);

    // The stored snapshot reparses and hashes to the manifest value.
    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 7);
    assert_eq!(manifest["all_passed"], true);
    let cfg = conelab_core::experiments::ExperimentConfig::from_json(
        &std::fs::read(dir.join("config.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(serde_json::Value::String(cfg.sha256_hex()), manifest["config_sha256"]);
}

#[test]
fn same_config_twice_gives_identical_csv_bytes() {
    let tmp = tempfile::tempdir().unwrap();
    let store = tmp.path().join("results");
    let cfg = write_config(tmp.path(), QUICK);
    let mut ids = Vec::new();
    for _ in 0..2 {
        let out = bin()
            .args(["run", cfg.to_str().unwrap(), "--out", store.to_str().unwrap()])
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(0));
        ids.push(stdout_str(&out).lines().next().unwrap().to_string());
    }
    assert_ne!(ids[0], ids[1], "run ids must be unique");
    for name in ["steinweiss.csv", "convergence.csv", "square_scaling.csv"] {
        let a = std::fs::read(store.join(&ids[0]).join(name)).unwrap();
        let b = std::fs::read(store.join(&ids[1]).join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between identical runs");
    }
}

#[test]
fn jobs_flag_does_not_change_output_bytes() {
    let tmp = tempfile::tempdir().unwrap();
    let store = tmp.path().join("results");
    let cfg = write_config(tmp.path(), QUICK);
    let mut csvs = Vec::new();
    for jobs in ["1", "4"] {
        let out = bin()
            .args([
                "run",
                cfg.to_str().unwrap(),
                "--out",
                store.to_str().unwrap(),
                "--jobs",
                jobs,
            ])
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(0));
        let id = stdout_str(&out).lines().next().unwrap().to_string();
        csvs.push(std::fs::read(store.join(&id).join("convergence.csv")).unwrap());
    }
    assert_eq!(csvs[0], csvs[1]);
}

#[test]
fn seed_flag_overrides_config_and_changes_hash() {
    let tmp = tempfile::tempdir().unwrap();
    let store = tmp.path().join("results");
    let cfg = write_config(tmp.path(), r#"{"seed": 11, "experiments": ["steinweiss"]}"#);
    let out = bin()
        .args([
            "run",
            cfg.to_str().unwrap(),
            "--out",
            store.to_str().unwrap(),
            "--seed",
            "123",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let id = stdout_str(&out).lines().next().unwrap().to_string();
    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(store.join(&id).join("manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["seed"], 123);
    let stored: serde_json::Value =
        serde_json::from_slice(&std::fs::read(store.join(&id).join("config.json")).unwrap())
            .unwrap();
    assert_eq!(stored["seed"], 123);
}

#[test]
fn list_show_plotdata_flow() {
    let tmp = tempfile::tempdir().unwrap();
    let store = tmp.path().join("results");

    // Empty store lists nothing and succeeds.
    let out = bin().args(["list", "--out", store.to_str().unwrap()]).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());

    let cfg = write_config(tmp.path(), QUICK);
    let out = bin()
        .args(["run", cfg.to_str().unwrap(), "--out", store.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let id = stdout_str(&out).lines().next().unwrap().to_string();

    let out = bin().args(["list", "--out", store.to_str().unwrap()]).output().unwrap();
    assert_eq!(stdout_str(&out).trim(), id);

    let out = bin().args(["show", &id, "--out", store.to_str().unwrap()]).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = stdout_str(&out);
    assert!(text.contains("seed:          11"));
    assert!(text.contains("overall:       pass"));

    let out = bin()
        .args(["show", "no-such-run", "--out", store.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));

    // Convergence projection: header plus r ascending within each lambda.
    let out = bin()
        .args(["plotdata", &id, "convergence", "--out", store.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = stdout_str(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap().trim_end(), "lambda,r,e");
    let mut prev: Option<(f64, f64)> = None;
    for line in lines.filter(|l| !l.is_empty()) {
        let cols: Vec<&str> = line.trim_end().split(',').collect();
        let key = (cols[0].parse::<f64>().unwrap(), cols[1].parse::<f64>().unwrap());
        if let Some(p) = prev {
            assert!(key > p, "rows must ascend: {p:?} then {key:?}");
        }
        prev = Some(key);
    }

    let out = bin()
        .args(["plotdata", &id, "square_scaling", "--out", store.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout_str(&out).starts_with("delta,norm,fit"));

    let out = bin()
        .args(["plotdata", &id, "not_an_experiment", "--out", store.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));

    // Known experiment name that was not part of this run.
    let out = bin()
        .args(["plotdata", &id, "majorant", "--out", store.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn env_var_sets_default_store() {
    let tmp = tempfile::tempdir().unwrap();
    let store = tmp.path().join("env-results");
    let cfg = write_config(tmp.path(), r#"{"seed": 5, "experiments": ["steinweiss"]}"#);
    let out = bin()
        .env("CONELAB_OUT", store.to_str().unwrap())
        .args(["run", cfg.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let id = stdout_str(&out).lines().next().unwrap().to_string();
    assert!(store.join(&id).join("manifest.json").is_file());

    // The --out flag wins over the environment.
    let flag_store = tmp.path().join("flag-results");
    let out = bin()
        .env("CONELAB_OUT", store.to_str().unwrap())
        .args(["run", cfg.to_str().unwrap(), "--out", flag_store.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let id = stdout_str(&out).lines().next().unwrap().to_string();
    assert!(flag_store.join(&id).join("manifest.json").is_file());
}

#[test]
fn config_out_dir_is_used_when_no_flag_or_env() {
    let tmp = tempfile::tempdir().unwrap();
    let store = tmp.path().join("cfg-results");
    let body = format!(
        r#"{{"seed": 5, "experiments": ["steinweiss"], "out_dir": {}}}"#,
        serde_json::to_string(store.to_str().unwrap()).unwrap()
    );
    let cfg = write_config(tmp.path(), &body);
    let out = bin()
        .env_remove("CONELAB_OUT")
        .args(["run", cfg.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let id = stdout_str(&out).lines().next().unwrap().to_string();
    assert!(store.join(&id).join("manifest.json").is_file());
}

#[test]
fn usage_errors_exit_one() {
    let out = bin().args(["frobnicate"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let out = bin().args(["--help"]).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout_str(&out).contains("conelab"));
}
