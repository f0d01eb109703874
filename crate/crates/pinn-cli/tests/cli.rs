//! End-to-end checks of the `pinn` binary: artifact layout, exit codes, and
//! flag overrides, using configs small enough to train in well under a second.

use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn pinn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pinn"))
        .args(args)
        .output()
        .expect("spawn pinn")
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn stdout_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_owned()
}

const MICRO: &str = r#"{
    "problem": 1,
    "train": {
        "case": "B",
        "hidden_layers": 2,
        "neurons": 8,
        "n_init": 50,
        "n_bound": 50,
        "n_colloc": 200,
        "iterations": 40,
        "restarts": 1,
        "log_every": 10
    }
}"#;

#[test]
fn shipped_configs_parse_and_validate() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for name in ["full_case_c.json", "desk.json", "smoke.json"] {
        let text = std::fs::read_to_string(root.join(name)).unwrap();
        let cfg = pinn_core::report::parse_config(&text)
            .unwrap_or_else(|err| panic!("{name}: {err}"));
        cfg.validate().unwrap_or_else(|err| panic!("{name}: {err}"));
    }
}

#[test]
fn malformed_configs_are_rejected_with_the_field_path() {
    let dir = TempDir::new().unwrap();
    let out_dir = dir.path().join("run");
    let out_flag = out_dir.to_str().unwrap();

    let zero = write_config(dir.path(), "zero.json", r#"{"train":{"neurons":0}}"#);
    let out = pinn(&["train", "--config", &zero, "--out", out_flag]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr_of(&out));
    assert!(stderr_of(&out).contains("train.neurons"));

    let unknown = write_config(dir.path(), "unknown.json", r#"{"train":{"neuron_count":9}}"#);
    let out = pinn(&["train", "--config", &unknown, "--out", out_flag]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_of(&out).contains("neuron_count"));

    let missing = dir.path().join("missing.json");
    let out = pinn(&["train", "--config", missing.to_str().unwrap(), "--out", out_flag]);
    assert_eq!(out.status.code(), Some(2));

    let out = pinn(&["train", "--out", out_flag, "--case", "D"]);
    assert_eq!(out.status.code(), Some(2));

    assert!(!out_dir.exists(), "rejected configs must not leave artifacts");
}

#[test]
fn train_artifacts_feed_every_downstream_command() {
    let dir = TempDir::new().unwrap();
    let config = write_config(dir.path(), "micro.json", MICRO);
    let run_dir = dir.path().join("run");
    let run_flag = run_dir.to_str().unwrap();

    let out = pinn(&["train", "--config", &config, "--out", run_flag, "--seed", "7"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr_of(&out));
    for name in [
        "checkpoint.json",
        "record.jsonl",
        "errors.csv",
        "errors.json",
        "manifest.json",
    ] {
        assert!(run_dir.join(name).exists(), "missing {name}");
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(run_dir.join("manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["seed"], 7, "--seed must override the config");
    assert_eq!(manifest["case"], "B");

    let checkpoint = run_dir.join("checkpoint.json");
    let ckpt_flag = checkpoint.to_str().unwrap();

    let out = pinn(&["evaluate", "--checkpoint", ckpt_flag, "--case", "B"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr_of(&out));
    let text = stdout_of(&out);
    assert!(text.contains("problem1 case B"));
    assert!(text.contains("mean |error|"));

    let errors = run_dir.join("errors.csv");
    let out = pinn(&["compare", "--errors", errors.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr_of(&out));
    assert!(stdout_of(&out).contains("model beats MCB-DQM"));

    let surf_dir = dir.path().join("surf");
    let out = pinn(&[
        "surfaces",
        "--checkpoint",
        ckpt_flag,
        "--dx",
        "0.25",
        "--dt",
        "0.5",
        "--out",
        surf_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr_of(&out));
    for name in [
        "model_surface.csv",
        "oracle_surface.csv",
        "error_surface.csv",
        "cross_sections.csv",
        "model_gradient.csv",
        "oracle_gradient.csv",
    ] {
        assert!(surf_dir.join(name).exists(), "missing {name}");
    }

    let bench_dir = dir.path().join("bench");
    let out = pinn(&[
        "benchmark",
        "--checkpoint",
        ckpt_flag,
        "--out",
        bench_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr_of(&out));
    assert!(stdout_of(&out).contains("linear fit"));
    let timing = std::fs::read_to_string(bench_dir.join("timing.csv")).unwrap();
    assert!(timing.contains("points,seconds"));
}

#[test]
fn nonpositive_grid_spacing_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    let config = write_config(dir.path(), "micro.json", MICRO);
    let run_dir = dir.path().join("run");
    let out = pinn(&["train", "--config", &config, "--out", run_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr_of(&out));

    let checkpoint = run_dir.join("checkpoint.json");
    let out = pinn(&[
        "surfaces",
        "--checkpoint",
        checkpoint.to_str().unwrap(),
        "--dx",
        "0",
        "--out",
        dir.path().join("surf").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_of(&out).contains("dx"));
}

#[test]
fn divergent_training_exits_one_and_dumps_the_loss_record() {
    let dir = TempDir::new().unwrap();
    let config = write_config(
        dir.path(),
        "explode.json",
        r#"{
            "train": {
                "case": "C",
                "hidden_layers": 2,
                "neurons": 8,
                "n_init": 20,
                "n_bound": 20,
                "n_colloc": 50,
                "iterations": 5,
                "restarts": 1,
                "log_every": 1,
                "lr_schedule": [{"from_iteration": 0, "lr": 1e200}]
            }
        }"#,
    );
    let run_dir = dir.path().join("run");
    let out = pinn(&["train", "--config", &config, "--out", run_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1), "{}", stderr_of(&out));
    assert!(stderr_of(&out).contains("diverged"));
    assert!(run_dir.join("record.jsonl").exists());
    assert!(!run_dir.join("checkpoint.json").exists());
}

#[test]
fn seed_flag_changes_the_trained_model() {
    let dir = TempDir::new().unwrap();
    let config = write_config(dir.path(), "micro.json", MICRO);
    let run = |seed: &str, name: &str| {
        let out_dir = dir.path().join(name);
        let out = pinn(&[
            "train",
            "--config",
            &config,
            "--out",
            out_dir.to_str().unwrap(),
            "--seed",
            seed,
        ]);
        assert_eq!(out.status.code(), Some(0), "{}", stderr_of(&out));
        std::fs::read(out_dir.join("checkpoint.json")).unwrap()
    };
    let a = run("1", "a");
    let b = run("2", "b");
    let a_again = run("1", "a2");
    assert_ne!(a, b, "different seeds must give different weights");
    assert_eq!(a, a_again, "the same seed must reproduce the checkpoint");
}
