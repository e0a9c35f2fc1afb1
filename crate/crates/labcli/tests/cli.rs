//! End-to-end checks of the `fcclab` binary: pipeline round trips, exit
//! codes, and experiment determinism under resumption and parallelism.

use std::fs;
use std::path::Path;
use std::process::Command;

fn fcclab() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fcclab"))
}

fn read_dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut entries = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                entries.push((rel, fs::read(&path).unwrap()));
            }
        }
    }
    entries.sort();
    entries
}

#[test]
fn pipeline_roundtrip_through_binary() {
    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str| dir.path().join(name);

    let status = fcclab()
        .args(["gen-formula", "--kind", "paired", "--num-vars", "8", "--seed", "3"])
        .arg("--out")
        .arg(p("f.txt"))
        .status()
        .unwrap();
    assert!(status.success());

    let status = fcclab()
        .args(["gen-data", "--dist", "paired", "--n", "600", "--seed", "4"])
        .arg("--formula")
        .arg(p("f.txt"))
        .arg("--out")
        .arg(p("train.tsv"))
        .status()
        .unwrap();
    assert!(status.success());

    let status = fcclab()
        .args(["train", "--hidden", "8", "--lr", "0.01", "--epochs", "20", "--patience", "0", "--seed", "5"])
        .arg("--data")
        .arg(p("train.tsv"))
        .arg("--out")
        .arg(p("model.json"))
        .status()
        .unwrap();
    assert!(status.success());

    let out = fcclab()
        .args(["reconstruct"])
        .arg("--model")
        .arg(p("model.json"))
        .arg("--formula")
        .arg(p("f.txt"))
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("pairing accuracy"), "{text}");

    let status = fcclab()
        .args(["heatmap", "--matrix", "w1", "--positive-only"])
        .arg("--model")
        .arg(p("model.json"))
        .arg("--formula")
        .arg(p("f.txt"))
        .arg("--out")
        .arg(p("w1.svg"))
        .status()
        .unwrap();
    assert!(status.success());
    let svg = fs::read_to_string(p("w1.svg")).unwrap();
    assert!(svg.starts_with("<svg"));
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, r#"{"experiment":"scaling","bogus_key":1}"#).unwrap();
    let status = fcclab()
        .args(["experiment", "scaling", "--out"])
        .arg(dir.path().join("out"))
        .arg("--config")
        .arg(&cfg)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));

    let status = fcclab()
        .args(["experiment", "nonsense", "--out"])
        .arg(dir.path().join("out2"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn experiment_identical_across_parallelism_and_resume() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("cfg.json");
    fs::write(
        &cfg_path,
        r#"{
  "experiment": "scaling",
  "hidden_sizes": [8],
  "clause_counts": [2, 4],
  "num_vars": 16,
  "outputs": 1,
  "trials": 2,
  "train_samples": 800,
  "test_samples": 200,
  "embedding": "identity",
  "use_b2": true,
  "train": { "lr": 0.003, "batch_size": 64, "max_epochs": 8, "patience": 0, "seed": 0, "snapshot_schedule": [] },
  "seed": 21,
  "baseline_samples": 3
}"#,
    )
    .unwrap();

    let run = |out: &Path, parallel: &str| {
        let status = fcclab()
            .args(["experiment", "scaling", "--parallel", parallel])
            .arg("--config")
            .arg(&cfg_path)
            .arg("--out")
            .arg(out)
            .status()
            .unwrap();
        assert!(status.success());
    };

    let a = dir.path().join("a");
    let b = dir.path().join("b");
    run(&a, "1");
    run(&b, "2");
    assert_eq!(read_dir_bytes(&a), read_dir_bytes(&b));

    // interrupt simulation: drop the report and one trial, rerun, compare
    fs::remove_file(a.join("report.json")).unwrap();
    fs::remove_file(a.join("trials/trial_j8_k4_t1.json")).unwrap();
    run(&a, "2");
    assert_eq!(read_dir_bytes(&a), read_dir_bytes(&b));
}

#[test]
fn resume_with_different_config_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let mk_cfg = |seed: u64| {
        format!(
            r#"{{
  "experiment": "paired",
  "hidden_sizes": [8],
  "clause_counts": [4],
  "num_vars": 8,
  "outputs": 1,
  "trials": 1,
  "train_samples": 300,
  "test_samples": 100,
  "embedding": "identity",
  "use_b2": false,
  "train": {{ "lr": 0.01, "batch_size": 64, "max_epochs": 3, "patience": 0, "seed": 0, "snapshot_schedule": [] }},
  "seed": {seed},
  "baseline_samples": 2
}}"#
        )
    };
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, mk_cfg(1)).unwrap();
    let status = fcclab()
        .args(["experiment", "paired"])
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());

    fs::write(&cfg, mk_cfg(2)).unwrap();
    let status = fcclab()
        .args(["experiment", "paired"])
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}
