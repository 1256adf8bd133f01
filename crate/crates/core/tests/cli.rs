//! Runs the `triplink` binary end to end.

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use triplink::decoder::read_predictions;

fn triplink(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_triplink"));
    cmd.args(args).env_remove("TRIPLINK_OUTPUT_DIR").env_remove("TRIPLINK_SEED").env_remove("TRIPLINK_DEVICE");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn ok(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("json on stdout")
}

/// Asserts the failure contract: nonzero exit, stderr is a single JSON line.
fn failure(out: &Output) -> Value {
    assert!(!out.status.success());
    let stderr = String::from_utf8(out.stderr.clone()).unwrap();
    let lines: Vec<&str> = stderr.lines().collect();
    assert_eq!(lines.len(), 1, "stderr: {stderr}");
    let v: Value = serde_json::from_str(lines[0]).unwrap();
    assert!(v["message"].is_string());
    v
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn synth(dir: &Path, sentences: &str) {
    ok(&triplink(&["synth", "--sentences", sentences, "--holdout", "10", "--output-dir", s(dir)], &[]));
}

#[test]
fn full_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let run = dir.path().join("run");
    synth(&data, "60");
    let train = data.join("train.json");
    let test = data.join("test.json");

    let summary = ok(&triplink(&["train", "--train", s(&train), "--epochs", "3", "--output-dir", s(&run)], &[]));
    assert_eq!(summary["epochs_run"], 3);
    assert_eq!(summary["train_sentences"], 50);
    let ckpt = run.join("model.ckpt");
    assert!(ckpt.exists() && run.join("train_log.jsonl").exists() && run.join("config.toml").exists());

    let preds = run.join("predictions.json");
    let p = ok(&triplink(&["predict", "--checkpoint", s(&ckpt), "--input", s(&test), "--output", s(&preds)], &[]));
    assert_eq!(p["sentences"], 10);

    let e = ok(&triplink(&["eval", "--gold", s(&test), "--predictions", s(&preds), "--splits", "--subtasks", "--taxonomy", "--json", "--output-dir", s(&run)], &[]));
    for k in ["precision", "recall", "f1"] {
        let v = e["main"][k].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&v));
    }
    assert!(e["subtasks"].is_object() && e["taxonomy"].is_object());
    assert!(run.join("eval.json").exists());

    let sweep = ok(&triplink(&["sweep-theta", "--checkpoint", s(&ckpt), "--gold", s(&test), "--grid", "0.2,0.5,0.8", "--output-dir", s(&run)], &[]));
    assert_eq!(sweep["points"].as_array().unwrap().len(), 3);

    let svg = run.join("lengths.svg");
    let a = ok(&triplink(&["analyze", "--dataset", s(&train), "--histogram", s(&svg), "--json", "--output-dir", s(&run)], &[]));
    assert_eq!(a["stats"]["sentences"], 50);
    assert!(std::fs::read_to_string(&svg).unwrap().starts_with("<svg"));

    let b = ok(&triplink(&["bench", "--checkpoint", s(&ckpt), "--dataset", s(&test), "--repetitions", "2", "--output-dir", s(&run)], &[]));
    assert_eq!(b["repetitions"], 2);
}

#[test]
fn untrained_checkpoint_predicts_nothing_at_one_half() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "30");
    let train = dir.path().join("train.json");
    let run = dir.path().join("run");
    let summary = ok(&triplink(&["train", "--train", s(&train), "--epochs", "0", "--output-dir", s(&run)], &[]));
    assert_eq!(summary["epochs_run"], 0);

    // Zeroed link matrices put every cell at sigmoid(0).
    let mut ckpt = triplink::model::load_checkpoint(run.join("model.ckpt")).unwrap();
    for u in &mut ckpt.model.linker.links {
        u.fill(0.0);
    }
    let zeroed = run.join("zero.ckpt");
    triplink::model::save_checkpoint(&zeroed, &ckpt).unwrap();

    let preds = run.join("p.json");
    ok(&triplink(&["predict", "--checkpoint", s(&zeroed), "--input", s(&train), "--output", s(&preds), "--theta", "0.5"], &[]));
    let records = read_predictions(&preds).unwrap();
    assert_eq!(records.len(), 20);
    assert!(records.iter().all(|r| r.triples.is_empty()));
}

#[test]
fn prediction_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "30");
    let train = dir.path().join("train.json");
    let run = dir.path().join("run");
    ok(&triplink(&["train", "--train", s(&train), "--epochs", "2", "--output-dir", s(&run)], &[]));
    let ckpt = run.join("model.ckpt");
    let mut bytes = Vec::new();
    for name in ["a.json", "b.json"] {
        let out = run.join(name);
        ok(&triplink(&["predict", "--checkpoint", s(&ckpt), "--input", s(&train), "--output", s(&out)], &[]));
        bytes.push(std::fs::read(out).unwrap());
    }
    assert_eq!(bytes[0], bytes[1]);
}

#[test]
fn environment_mirrors_flags() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b, c) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("c"));
    ok(&triplink(&["synth", "--sentences", "20", "--seed", "5", "--output-dir", s(&a)], &[]));
    ok(&triplink(&["synth", "--sentences", "20"], &[("TRIPLINK_SEED", "5"), ("TRIPLINK_OUTPUT_DIR", s(&b))]));
    ok(&triplink(&["synth", "--sentences", "20", "--seed", "6", "--output-dir", s(&c)], &[]));
    let read = |d: &Path| std::fs::read(d.join("train.json")).unwrap();
    assert_eq!(read(&a), read(&b));
    assert_ne!(read(&a), read(&c));

    let err = failure(&triplink(&["train", "--train", s(&a.join("train.json")), "--epochs", "0", "--output-dir", s(&c)], &[("TRIPLINK_DEVICE", "cuda")]));
    assert_eq!(err["error"], "unavailable");
}

#[test]
fn failures_print_one_json_line() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.json");
    let err = failure(&triplink(&["analyze", "--dataset", s(&missing), "--output-dir", s(dir.path())], &[]));
    assert_eq!(err["error"], "io");

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"sentText\": 3}\n").unwrap();
    let err = failure(&triplink(&["analyze", "--dataset", s(&bad), "--output-dir", s(dir.path())], &[]));
    assert!(err["error"] == "malformed-record" || err["error"] == "json", "{err}");

    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "no-such-key = 1\n").unwrap();
    let err = failure(&triplink(&["train", "--config", s(&cfg)], &[]));
    assert_eq!(err["error"], "config");

    let err = failure(&triplink(&["sweep-theta", "--checkpoint", "x", "--gold", "y", "--grid", "0.5:0.1:0.1"], &[]));
    assert_eq!(err["error"], "config");

    let err = failure(&triplink(&["predict", "--nope"], &[]));
    assert_eq!(err["error"], "usage");
}
