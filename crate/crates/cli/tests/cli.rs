//! End-to-end runs of the `auginf` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const TINY_MODEL: &[&str] = &[
    "--epochs",
    "2",
    "--hidden",
    "4",
    "--heads",
    "2",
    "--output-heads",
    "2",
    "--embed-dim",
    "3",
    "--walks-per-node",
    "2",
    "--walk-length",
    "6",
    "--latent-dim",
    "3",
    "--gae-hidden",
    "4",
    "--ae-epochs",
    "3",
    "--batch-size",
    "8",
    "--aug-count",
    "2",
    "--aug-threshold",
    "0.6",
];

fn auginf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_auginf")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = auginf(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn synth(dir: &Path) -> PathBuf {
    let out = dir.join("data");
    ok(&["synth", "--out", s(&out), "--samples", "48", "--nodes", "120", "--subgraph-size", "10", "--seed", "3"]);
    out.join("data.jsonl")
}

fn with_model<'a>(head: &[&'a str]) -> Vec<&'a str> {
    head.iter().copied().chain(TINY_MODEL.iter().copied()).collect()
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(auginf(&["train"]).status.code(), Some(2));
    assert_eq!(auginf(&["frobnicate"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let out = auginf(&["synth", "--out", s(dir.path()), "--p", "1.5"]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn missing_inputs_are_data_errors_naming_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.jsonl");
    let out = auginf(&with_model(&["train", "--data", s(&missing), "--out", s(dir.path())]));
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.jsonl"));
}

#[test]
fn train_then_eval_with_and_without_test_augmentation() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path());
    let run = dir.path().join("run");
    ok(&with_model(&["train", "--data", s(&data), "--out", s(&run), "--arm", "2"]));
    assert!(run.join("model.ckpt").exists() && run.join("trace.jsonl").exists());
    assert!(!run.join("vgae.ckpt").exists(), "arm 2 needs no VGAE");

    let eval = dir.path().join("eval");
    let ck = run.join("model.ckpt");
    let out = auginf(&["eval", "--data", s(&data), "--checkpoint", s(&ck), "--out", s(&eval), "--test-aug"]);
    assert_eq!(out.status.code(), Some(2), "test-time augmentation without a VGAE");

    ok(&["eval", "--data", s(&data), "--checkpoint", s(&ck), "--out", s(&eval)]);
    let metrics = std::fs::read_to_string(eval.join("metrics.jsonl")).unwrap();
    let v: serde_json::Value = serde_json::from_str(metrics.lines().next().unwrap()).unwrap();
    assert!((0.0..=1.0).contains(&v["auc"].as_f64().unwrap()));

    let run8 = dir.path().join("run8");
    ok(&with_model(&["train", "--data", s(&data), "--out", s(&run8), "--arm", "8"]));
    let vgae = run8.join("vgae.ckpt");
    assert!(vgae.exists());
    ok(&["eval", "--data", s(&data), "--checkpoint", s(&ck), "--out", s(&eval), "--test-aug", "--vgae", s(&vgae)]);
}

#[test]
fn ablation_writes_every_arm_and_replays_identically() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path());
    let out = dir.path().join("ablate");
    ok(&with_model(&["ablate", "--data", s(&data), "--out", s(&out), "--runs", "1", "--seed", "4"]));
    let metrics = std::fs::read_to_string(out.join("metrics.jsonl")).unwrap();
    assert_eq!(metrics.lines().count(), 8);
    let summary: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["arms"].as_array().unwrap().len(), 8);
    assert_eq!(summary["deltas_vs_arm_1"].as_array().unwrap().len(), 7);

    let replay = dir.path().join("replay");
    let printed = ok(&["replay", "--manifest", s(&out.join("manifest.json")), "--out", s(&replay)]);
    assert!(printed.contains("identical metrics.jsonl"), "{printed}");
    assert!(!printed.contains("DIFFERS"));

    std::fs::write(&data, b"").unwrap();
    let tampered = auginf(&["replay", "--manifest", s(&out.join("manifest.json")), "--out", s(&replay)]);
    assert_eq!(tampered.status.code(), Some(3), "changed inputs are refused");
}

#[test]
fn raising_the_threshold_never_adds_more_edges() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path());
    let out = dir.path().join("sweep");
    ok(&with_model(&[
        "sweep",
        "--data",
        s(&data),
        "--out",
        s(&out),
        "--vary",
        "threshold",
        "--thresholds",
        "0.5,0.6,0.7,0.8,0.9",
    ]));
    let rows: Vec<serde_json::Value> = std::fs::read_to_string(out.join("sweep.jsonl"))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(rows.len(), 5);
    let pct: Vec<f64> = rows.iter().map(|r| r["added_edge_percent"].as_f64().unwrap()).collect();
    assert!(pct.windows(2).all(|w| w[1] <= w[0]), "{pct:?}");
}
