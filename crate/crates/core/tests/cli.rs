//! End-to-end runs of the command-line binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use spatial_lucid::checkpoint::load_ensemble;
use spatial_lucid::EvalReport;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spatial-lucid")).args(args).output().unwrap()
}

fn code(args: &[&str]) -> i32 {
    run(args).status.code().unwrap()
}

fn ok(args: &[&str]) {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Every file under `dir` except run manifests, keyed by relative path.
fn tree(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let path = e.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else if !path.to_str().unwrap().ends_with("manifest.json") {
                out.push((path.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&path).unwrap()));
            }
        }
    }
    out.sort();
    out
}

const FAST: [&str; 8] = ["--epochs", "3", "--cutoff", "2", "--layers", "2", "--hidden", "8"];

fn with_fast<'a>(args: &[&'a str]) -> Vec<&'a str> {
    args.iter().copied().chain(FAST).collect()
}

#[test]
fn generate_is_reproducible() {
    let t = tempfile::tempdir().unwrap();
    let (a, b) = (t.path().join("a"), t.path().join("b"));
    ok(&["generate", "--benchmark", "fig1", "--seed", "7", "--out", p(&a)]);
    ok(&["generate", "--benchmark", "fig1", "--seed", "7", "--out", p(&b)]);
    let ta = tree(&a);
    assert_eq!(ta, tree(&b));
    let manifest = fs::read_to_string(a.join("manifest.txt")).unwrap();
    assert_eq!(manifest.lines().filter(|l| l.ends_with(".csv")).count(), 160);
    assert!(a.join("run_manifest.json").exists());
}

#[test]
fn usage_errors_exit_with_one() {
    let t = tempfile::tempdir().unwrap();
    assert_eq!(code(&["generate", "--benchmark", "fig1"]), 1);
    let d = t.path().join("d");
    ok(&["generate", "--benchmark", "fig1", "--samples-per-cell", "5", "--out", p(&d)]);
    let m = t.path().join("m");
    assert_eq!(code(&["train", "--strategy", "osfa", "--frozen-layers", "2", "--data", p(&d), "--out", p(&m)]), 1);
    assert_eq!(code(&["train", "--strategy", "place-type", "--alpha-threshold", "2", "--data", p(&d), "--out", p(&m)]), 1);
    assert_eq!(code(&["frobnicate"]), 1);
    assert_eq!(code(&["--help"]), 0);
}

#[test]
fn missing_checkpoint_exits_with_two() {
    let t = tempfile::tempdir().unwrap();
    let d = t.path().join("d");
    ok(&["generate", "--benchmark", "fig1", "--samples-per-cell", "5", "--out", p(&d)]);
    let out = run(&["eval", "--checkpoint", p(&t.path().join("none")), "--data", p(&d), "--out", p(&t.path().join("r.json"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!String::from_utf8_lossy(&out.stderr).is_empty());
}

#[test]
fn train_eval_explain_replay() {
    let t = tempfile::tempdir().unwrap();
    let d = t.path().join("d");
    ok(&["generate", "--benchmark", "fig1", "--samples-per-cell", "8", "--out", p(&d)]);

    let m = t.path().join("wdlr");
    ok(&with_fast(&["train", "--strategy", "wdlr", "--data", p(&d), "--out", p(&m)]));
    let log = fs::read_to_string(m.join("training_log.csv")).unwrap();
    assert_eq!(log.lines().next().unwrap(), "epoch,member,mean_loss,val_accuracy,learning_rates");
    assert!(log.lines().skip(1).all(|l| l.ends_with(",0.001;0.0005")), "{log}");
    assert_eq!(load_ensemble(&m).unwrap().members.len(), 2);

    let report = t.path().join("report.json");
    ok(&["eval", "--checkpoint", p(&m), "--data", p(&d), "--out", p(&report)]);
    let r: EvalReport = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    for v in [r.accuracy, r.precision, r.recall, r.f1] {
        assert!((0.0..=1.0).contains(&v));
    }

    let before = tree(&m);
    fs::remove_file(m.join("member_pt0.json")).ok();
    ok(&["replay", "--manifest", p(&m.join("run_manifest.json"))]);
    assert_eq!(tree(&m), before);

    let o = t.path().join("osfa");
    ok(&with_fast(&["train", "--strategy", "osfa", "--data", p(&d), "--out", p(&o)]));
    let csv = t.path().join("global.csv");
    ok(&["explain", "--checkpoint", p(&o), "--data", p(&d), "--global", "--repeats", "2", "--out", p(&csv)]);
    let table = fs::read_to_string(&csv).unwrap();
    assert_eq!(table.lines().next().unwrap(), "rank,center,neighbors,importance,std");
    // 4 centers times the 34 neighbor multisets of size 1..=3
    assert_eq!(table.lines().count(), 1 + 4 * 34);

    let bad = t.path().join("bad.csv");
    assert_eq!(
        code(&["explain", "--checkpoint", p(&o), "--data", p(&d), "--global", "--repeats", "0", "--out", p(&bad)]),
        1
    );
    assert_eq!(code(&["explain", "--checkpoint", p(&o), "--data", p(&d), "--out", p(&bad)]), 1);
}

#[test]
fn sweep_emits_one_row_per_frozen_count() {
    let t = tempfile::tempdir().unwrap();
    let d = t.path().join("d");
    ok(&["generate", "--benchmark", "fig1", "--samples-per-cell", "6", "--out", p(&d)]);
    let s = t.path().join("s");
    ok(&with_fast(&["sweep-frozen", "--data", p(&d), "--out", p(&s)]));
    let sweep = fs::read_to_string(s.join("sweep.csv")).unwrap();
    let ks: Vec<&str> = sweep.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(ks, ["0", "1", "2"]);
    assert!(fs::read_to_string(s.join("pretrained.csv")).unwrap().starts_with("model,accuracy"));
}
