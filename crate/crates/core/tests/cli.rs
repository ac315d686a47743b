use std::path::Path;
use std::process::{Command, Output};

use stratlearn::io::{load_dataset, serialize_mps};

const CONFIG: &str = r#"{
  "family": {"kind": "fuel_cell", "params": {"horizon": 4}, "radius": 0.25},
  "datagen": {"min_n": 40, "max_n": 40},
  "test": {"n": 10},
  "train": {"epochs": 3},
  "inference": {"k": 3}
}"#;

fn stratlearn(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stratlearn")).current_dir(dir).args(args).output().unwrap()
}

fn text(b: &[u8]) -> String {
    String::from_utf8_lossy(b).into_owned()
}

#[test]
fn full_pipeline_and_single_instance_solve() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("cfg.json"), CONFIG).unwrap();

    let out = stratlearn(dir.path(), &["generate", "--config", "cfg.json"]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    let first = text(&out.stdout).lines().next().unwrap().to_string();
    let fields: Vec<&str> = first.split(", ").collect();
    assert_eq!(fields.len(), 3, "{first}");
    assert!(fields[0].starts_with("N=40") && fields[1].starts_with("M=") && fields[2].starts_with("good_turing="), "{first}");

    let out = stratlearn(dir.path(), &["prune", "--config", "cfg.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(text(&out.stderr).contains("reward table incomplete"));

    for stage in ["label", "prune", "train", "eval"] {
        let out = stratlearn(dir.path(), &[stage, "--config", "cfg.json"]);
        assert_eq!(out.status.code(), Some(0), "{stage}: {}", text(&out.stderr));
    }
    for f in ["train.ndjson", "test.ndjson", "library.json", "model.json", "loss.csv", "metrics.json", "metrics.csv", "timings.csv"] {
        assert!(dir.path().join("out").join(f).exists(), "{f} missing");
    }
    let loss = std::fs::read_to_string(dir.path().join("out/loss.csv")).unwrap();
    assert_eq!(loss.lines().count(), 4);

    let test = load_dataset(&dir.path().join("out/test.ndjson")).unwrap();
    std::fs::write(dir.path().join("one.mps"), serialize_mps(&test.instance(0))).unwrap();
    let out = stratlearn(dir.path(), &["solve", "--config", "cfg.json", "--instance", "one.mps", "--reference"]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    for key in ["objective", "p", "d", "strategy_index", "time_ms"] {
        assert!(doc.get(key).is_some(), "missing {key}");
    }
    assert!(doc["d"].as_f64().unwrap() >= 0.0);
    let f_star = test.records[0].f_star;
    let objective = doc["objective"].as_f64().unwrap();
    if doc["p"].as_f64().unwrap() <= 1e-9 {
        assert!(objective >= f_star - 1e-7 * (1.0 + f_star.abs()), "feasible point {objective} beats optimum {f_star}");
    }

    let out = stratlearn(dir.path(), &["solve", "--config", "cfg.json", "--instance", "one.mps"]);
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(doc["d"].is_null());

    let out = stratlearn(dir.path(), &["bench", "--config", "cfg.json", "--limit", "4"]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    assert!(text(&out.stdout).contains("ratio="));
}

#[test]
fn usage_and_validation_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = stratlearn(dir.path(), &["--help"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(text(&out.stdout).contains("oracle-check"));

    let out = stratlearn(dir.path(), &["frobnicate"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(text(&out.stderr).contains("Usage"));

    let out = stratlearn(dir.path(), &["eval", "--bogus-flag"]);
    assert_eq!(out.status.code(), Some(1));

    std::fs::write(dir.path().join("bad.json"), r#"{"seed": "seven"}"#).unwrap();
    let out = stratlearn(dir.path(), &["generate", "--config", "bad.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(text(&out.stderr).contains("configuration error"));

    let out = stratlearn(dir.path(), &["generate", "--config", "missing.json"]);
    assert_eq!(out.status.code(), Some(1));

    let out = stratlearn(dir.path(), &["eval"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(text(&out.stderr).contains("does not exist"));

    std::fs::write(dir.path().join("broken.mps"), "NAME X\nROWS\n N obj\nCOLUMNS\n x obj 1 ghost 1\nENDATA\n").unwrap();
    let out = stratlearn(dir.path(), &["solve", "--instance", "broken.mps", "--model", "broken.mps", "--library", "broken.mps"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(text(&out.stderr).contains("line 5"));
}

#[test]
fn oracle_check_and_thread_override() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_stratlearn"))
        .current_dir(dir.path())
        .env("MSK_THREADS", "1")
        .args(["oracle-check", "--count", "5", "--seed", "3"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    assert!(text(&out.stdout).starts_with("checked=5, mismatches=0"));

    let out = Command::new(env!("CARGO_BIN_EXE_stratlearn")).env("MSK_THREADS", "zero").args(["oracle-check"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}
