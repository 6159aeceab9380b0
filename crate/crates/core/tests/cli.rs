use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn mind(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mind"))
        .current_dir(dir)
        .env_remove("MIND_OUT_DIR")
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = mind(dir, args);
    assert!(
        out.status.success(),
        "mind {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn jsonl(path: impl AsRef<Path>) -> Vec<Value> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

/// A 200-sample synthetic set and a short run config next to it.
fn workspace(task: &str) -> (tempfile::TempDir, PathBuf) {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    fs::write(dir.join("spec.toml"), format!("n_samples = 200\n{task}")).unwrap();
    ok(dir, &["synth", "--config", "spec.toml", "--out", "data.mndf", "--seed", "11"]);
    let cfg = dir.join("run.toml");
    fs::write(&cfg, "[data]\npath = \"data.mndf\"\n[model]\nd_k = 8\n[train]\nepochs = 2\nbatch_size = 16\n").unwrap();
    (tmp, cfg)
}

#[test]
fn train_eval_rerun_and_dump() {
    let (tmp, _) = workspace("");
    let dir = tmp.path();
    ok(dir, &["train", "--config", "run.toml", "--out-dir", "r1", "--seed", "2"]);
    for artifact in ["manifest.json", "losses.jsonl", "checkpoint.mndp", "metrics.jsonl", "report.txt"] {
        assert!(dir.join("r1").join(artifact).is_file(), "missing {artifact}");
    }

    // Logged totals follow the weighted sum exactly.
    for line in jsonl(dir.join("r1/losses.jsonl")) {
        let f = |k: &str| line[k].as_f64().unwrap();
        let total = f("task")
            + f("np")
            + f("alpha") * f("info")
            + f("beta") * f("cons")
            + f("gamma") * f("diff")
            + f("lambda") * (f("recon") + f("cyr"));
        assert!((total - f("total")).abs() <= 1e-12 * total.abs().max(1.0));
    }

    // Rerun from the manifest reproduces every artifact bitwise.
    ok(dir, &["train", "--manifest", "r1/manifest.json", "--out-dir", "r2"]);
    for artifact in ["losses.jsonl", "checkpoint.mndp", "metrics.jsonl"] {
        assert_eq!(
            fs::read(dir.join("r1").join(artifact)).unwrap(),
            fs::read(dir.join("r2").join(artifact)).unwrap(),
            "{artifact} differs"
        );
    }

    // Eval of the saved checkpoint matches the recorded validation metrics.
    ok(dir, &["eval", "--checkpoint", "r1/checkpoint.mndp", "--config", "run.toml", "--split", "valid", "--out", "ev.json"]);
    let eval: Value = serde_json::from_str(&fs::read_to_string(dir.join("ev.json")).unwrap()).unwrap();
    let metrics = jsonl(dir.join("r1/metrics.jsonl"));
    let last = metrics.last().unwrap();
    assert_eq!(last["kind"], "final");
    assert_eq!(eval, last["valid"]);

    let bad = mind(dir, &["eval", "--checkpoint", "r1/checkpoint.mndp", "--config", "run.toml", "--split", "holdout"]);
    assert_eq!(bad.status.code(), Some(2));

    // Embedding dumps: 9 rows per sample; S and P are deterministic, N only with a fixed seed.
    let dump = |out: &str, extra: &[&str]| {
        let mut args = vec!["dump-embeddings", "--checkpoint", "r1/checkpoint.mndp", "--config", "run.toml", "--out", out];
        args.extend_from_slice(extra);
        ok(dir, &args);
        let text = fs::read_to_string(dir.join(out)).unwrap();
        text.lines().skip(1).map(String::from).collect::<Vec<_>>()
    };
    let rows_of = |rows: &[String], component: &str| -> Vec<String> {
        rows.iter().filter(|r| r.split(',').nth(3) == Some(component)).cloned().collect()
    };
    let a = dump("a.csv", &[]);
    let b = dump("b.csv", &[]);
    assert_eq!(a.len(), 200 * 9);
    assert_eq!(rows_of(&a, "S"), rows_of(&b, "S"));
    assert_eq!(rows_of(&a, "P"), rows_of(&b, "P"));
    assert_ne!(rows_of(&a, "N"), rows_of(&b, "N"));
    let c = dump("c.csv", &["--fixed-noise-seed", "9"]);
    let d = dump("d.csv", &["--fixed-noise-seed", "9"]);
    assert_eq!(c, d);
}

#[test]
fn ablate_flag_zeroes_its_term_in_the_log() {
    let (tmp, _) = workspace("");
    let dir = tmp.path();
    ok(dir, &["train", "--config", "run.toml", "--out-dir", "run", "--ablate", "no-info"]);
    let lines = jsonl(dir.join("run/losses.jsonl"));
    assert!(!lines.is_empty());
    assert!(lines.iter().all(|l| l["info"].as_f64() == Some(0.0)));
    assert!(lines.iter().any(|l| l["cons"].as_f64().unwrap() != 0.0));
}

#[test]
fn binary_task_report_omits_regression_metrics() {
    let (tmp, _) = workspace("[task]\nkind = \"classification\"\nclasses = 2\n");
    let dir = tmp.path();
    ok(dir, &["train", "--config", "run.toml", "--out-dir", "run"]);
    let last = jsonl(dir.join("run/metrics.jsonl")).pop().unwrap();
    let valid = last["valid"].as_object().unwrap();
    for key in ["acc7", "mae", "corr"] {
        assert!(!valid.contains_key(key), "{key} reported for a binary task");
    }
    assert!(valid.contains_key("acc2") && valid.contains_key("f1"));
}

#[test]
fn ablation_grid_from_the_cli() {
    let (tmp, _) = workspace("");
    let dir = tmp.path();
    fs::write(
        dir.join("tiny.toml"),
        "[data]\npath = \"data.mndf\"\n[model]\nd_k = 4\n[train]\nepochs = 1\nbatch_size = 16\n",
    )
    .unwrap();
    ok(dir, &["ablate", "--config", "tiny.toml", "--out-dir", "abl", "--seed", "7"]);
    let rows = jsonl(dir.join("abl/ablation.jsonl"));
    assert_eq!(rows.len(), 14);
    assert!(rows.iter().all(|r| r["seed"] == 7));
    let table = fs::read_to_string(dir.join("abl/ablation.txt")).unwrap();
    for title in ["Role of Modality", "Role of Disentanglement", "Role of Constraint"] {
        assert!(table.contains(title), "{table}");
    }
}

#[test]
fn invalid_inputs_fail_cleanly() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    fs::write(dir.join("bad.toml"), "d_shared = 10\nd_private = 10\n").unwrap();
    let out = mind(dir, &["synth", "--config", "bad.toml", "--out", "x.mndf"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("exceeds"));

    fs::write(dir.join("typo.toml"), "[train]\nepoch = 3\n").unwrap();
    let out = mind(dir, &["train", "--config", "typo.toml"]);
    assert_eq!(out.status.code(), Some(1));

    let out = mind(dir, &["train", "--ablate", "no-everything"]);
    assert_ne!(out.status.code(), Some(0));
}
