use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn relpre(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_relpre"))
        .current_dir(dir)
        .env("RELPRE_THREADS", "1")
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = relpre(dir, args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn json_lines(text: &str) -> Vec<serde_json::Value> {
    text.lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

#[test]
fn generation_is_byte_identical_across_runs() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    ok(d, &["gen-interactions", "--count", "6", "--seed", "4", "--out", "a.bin"]);
    ok(d, &["gen-interactions", "--count", "6", "--seed", "4", "--out", "b.bin"]);
    assert_eq!(std::fs::read(d.join("a.bin")).unwrap(), std::fs::read(d.join("b.bin")).unwrap());
    ok(d, &["gen-task", "--task", "sweep", "--blocks", "3..4", "--count", "4", "--seed", "4", "--out", "s1.bin"]);
    ok(d, &["gen-task", "--task", "sweep", "--blocks", "3,4", "--count", "4", "--seed", "4", "--out", "s2.bin"]);
    assert_eq!(std::fs::read(d.join("s1.bin")).unwrap(), std::fs::read(d.join("s2.bin")).unwrap());
}

#[test]
fn existing_output_needs_force() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    ok(d, &["gen-task", "--task", "unstack", "--blocks", "3", "--count", "2", "--out", "t.bin"]);
    let again = relpre(d, &["gen-task", "--task", "unstack", "--blocks", "3", "--count", "2", "--out", "t.bin"]);
    assert_eq!(again.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&again.stderr).contains("--force"));
    ok(d, &["gen-task", "--task", "unstack", "--blocks", "3", "--count", "2", "--out", "t.bin", "--force"]);
}

#[test]
fn config_errors_exit_with_two() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    let bad_key = relpre(d, &["--set", "relnet.nonsense=1", "gen-interactions", "--count", "1", "--out", "x.bin"]);
    assert_eq!(bad_key.status.code(), Some(2));
    let bad_preset = relpre(d, &["--preset", "huge", "gen-interactions", "--count", "1", "--out", "x.bin"]);
    assert_eq!(bad_preset.status.code(), Some(2));
    assert!(!d.join("x.bin").exists());
}

#[test]
fn digest_mismatch_is_rejected() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    ok(d, &["gen-task", "--task", "unstack", "--blocks", "3", "--count", "4", "--out", "t.bin"]);
    let out = relpre(d, &["--set", "precond.epochs=3", "baseline", "--kind", "real2sim", "--test", "t.bin"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("digest"));
}

#[test]
fn real2sim_on_exact_geometry_is_perfect() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    ok(d, &["gen-task", "--task", "unstack", "--blocks", "3..5", "--count", "6", "--marginal-fraction", "0.3", "--out", "t.bin"]);
    let rows = json_lines(&ok(d, &["baseline", "--kind", "real2sim", "--geometry", "exact", "--test", "t.bin"]));
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0]["f1"], 1.0);
    assert_eq!(rows[0]["test_split"], "3,4,5");
}

#[test]
fn edge_dump_is_one_hot_and_repeatable() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    ok(d, &["--set", "precond.edges=dense", "gen-task", "--task", "unstack", "--blocks", "4", "--count", "2", "--out", "t.bin"]);
    let args = ["--set", "precond.edges=dense", "baseline", "--kind", "discrete", "--dump-edges", "--test", "t.bin"];
    let first = ok(d, &args);
    assert_eq!(first, ok(d, &args));
    let rows = json_lines(&first);
    // dense graphs over 4 objects: 12 directed edges per scene
    assert_eq!(rows.len(), 2 * 12);
    for row in rows {
        let f: Vec<f64> = serde_json::from_value(row["feature"].clone()).unwrap();
        assert_eq!(f.len(), 26);
        assert_eq!(f.iter().filter(|&&v| v == 1.0).count(), 1);
        assert_eq!(f.iter().sum::<f64>(), 1.0);
    }
}

#[test]
fn small_pipeline_end_to_end() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    let small = [
        "--set", "grid.resolution=16,16,16",
        "--set", "grid.voxel_size=0.04",
        "--set", "relnet.epochs=1",
        "--set", "relnet.batch_size=8",
        "--set", "precond.epochs=2",
    ];
    let run = |args: &[&str]| ok(d, &[&small[..], args].concat());
    run(&["gen-interactions", "--count", "16", "--seed", "1", "--out", "inter.bin"]);
    run(&["gen-task", "--task", "unstack", "--blocks", "3..4", "--count", "4", "--seed", "1", "--out", "train.bin"]);
    run(&["gen-task", "--task", "unstack", "--blocks", "5", "--count", "4", "--seed", "2", "--first-id", "100", "--out", "test.bin"]);

    let log = json_lines(&run(&["train-relnet", "--data", "inter.bin", "--out", "rel.ck"]));
    assert!(log.last().unwrap()["best_epoch"].is_number());
    run(&["embed", "--model", "rel.ck", "--scenes", "train.bin", "--out", "e_train.bin"]);
    run(&["embed", "--model", "rel.ck", "--scenes", "test.bin", "--out", "e_test.bin"]);
    run(&["train-precond", "--train", "train.bin", "--embeddings", "e_train.bin", "--out", "pre.ck", "--report", "pre.jsonl"]);
    assert!(d.join("pre.jsonl").exists());

    let rows = json_lines(&run(&["eval", "--model", "pre.ck", "--test", "test.bin", "--embeddings", "e_test.bin"]));
    let row = rows[0].as_object().unwrap();
    let mut keys: Vec<&str> = row.keys().map(String::as_str).collect();
    keys.sort_unstable();
    assert_eq!(keys, ["config_digest", "edge_source", "f1", "model", "seed", "test_split", "train_split", "weighted_f1"]);
    assert_eq!(row["model"], "gnn-sparse");
    assert_eq!(row["edge_source"], "learned");
    assert_eq!(row["train_split"], "3,4");
    assert_eq!(row["test_split"], "5");

    // learned features without embeddings is a config error
    let out = relpre(d, &[&small[..], &["train-precond", "--train", "train.bin", "--out", "p2.ck"]].concat());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn gradcheck_passes() {
    let dir = TempDir::new().unwrap();
    let rows = json_lines(&ok(dir.path(), &["gradcheck"]));
    assert_eq!(rows.len(), 8);
    assert!(rows.iter().all(|r| r["passed"] == true));
}
