use std::path::Path;
use std::process::{Command, Output};

use dynembed::eval::{clustering_metrics, kmeans, DEFAULT_RESTARTS};
use dynembed::io::{read_delta, read_embedding, read_labels, read_snapshot, Manifest};
use dynembed::pipeline::{init_offline, EmbeddingRun, RunConfig};
use tempfile::TempDir;

fn dynembed(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dynembed"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("spawn dynembed")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = dynembed(dir, args);
    assert!(
        out.status.success(),
        "dynembed {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn read(dir: &Path, file: &str) -> Vec<u8> {
    std::fs::read(dir.join(file)).unwrap()
}

/// Synthetic stream in `s/` plus an offline embedding of it in `e/`.
fn fixture(steps: &str) -> TempDir {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["synth", "--out", "s", "--n", "120", "--steps", steps, "--drift", "0.01", "--sbm-seed", "8"]);
    ok(
        dir.path(),
        &["embed", "--graph", "s/edges.tsv", "--attrs", "s/attributes.tsv", "--out", "e", "--k", "5", "--l", "4"],
    );
    dir
}

#[test]
fn embed_twice_is_byte_identical() {
    let dir = fixture("1");
    let d = dir.path();
    ok(d, &["embed", "--graph", "s/edges.tsv", "--attrs", "s/attributes.tsv", "--out", "e2", "--k", "5", "--l", "4"]);
    for f in ["embedding.tsv", "embedding.json", "checkpoint.json", "diagnostics.json"] {
        assert_eq!(read(d, &format!("e/{f}")), read(d, &format!("e2/{f}")), "{f} differs");
    }
}

#[test]
fn missing_input_exits_1_and_names_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dynembed(dir.path(), &["embed", "--graph", "nowhere.tsv", "--attrs", "x.tsv", "--out", "e"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nowhere.tsv"));
}

#[test]
fn bad_flags_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let out = dynembed(dir.path(), &["embed", "--k", "many"]);
    assert_eq!(out.status.code(), Some(1));
    let out = dynembed(dir.path(), &["embed", "--graph", "a", "--attrs", "b", "--out", "c", "--k", "2", "--l", "5"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn corrupt_delta_exits_1_with_line() {
    let dir = fixture("1");
    let d = dir.path();
    std::fs::write(d.join("bad.tsv"), "#delta\n#edges\n0\t1\tnot-a-number\n").unwrap();
    let out = dynembed(d, &["update", "--checkpoint", "e/checkpoint.json", "--delta", "bad.tsv", "--out", "u"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bad.tsv") && err.contains("line 3"), "{err}");
}

#[test]
fn stale_checkpoint_version_exits_3() {
    let dir = fixture("1");
    let d = dir.path();
    let text = std::fs::read_to_string(d.join("e/checkpoint.json")).unwrap();
    assert!(text.starts_with("{\"version\":1,"));
    std::fs::write(d.join("old.json"), text.replacen("\"version\":1", "\"version\":0", 1)).unwrap();
    let out = dynembed(d, &["update", "--checkpoint", "old.json", "--delta", "s/delta_001.tsv", "--out", "u"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn tampered_checkpoint_exits_1() {
    let dir = fixture("1");
    let d = dir.path();
    let text = std::fs::read_to_string(d.join("e/checkpoint.json")).unwrap();
    let tampered = text.replacen("\"snapshot_digest\":\"", "\"snapshot_digest\":\"00", 1);
    assert_ne!(tampered, text);
    std::fs::write(d.join("t.json"), tampered).unwrap();
    let out = dynembed(d, &["update", "--checkpoint", "t.json", "--delta", "s/delta_001.tsv", "--out", "u"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn empty_delta_leaves_embedding_unchanged() {
    let dir = fixture("1");
    let d = dir.path();
    std::fs::write(d.join("zero.tsv"), "#delta\n#edges\n#attributes\n").unwrap();
    let stdout = ok(d, &["update", "--checkpoint", "e/checkpoint.json", "--delta", "zero.tsv", "--out", "u"]);
    assert!(stdout.contains("step 1"));
    assert_eq!(read(d, "e/embedding.tsv"), read(d, "u/embedding.tsv"));
}

#[test]
fn replaying_ten_deltas_matches_the_library() {
    let dir = fixture("10");
    let d = dir.path();
    let stdout = ok(d, &["update", "--checkpoint", "e/checkpoint.json", "--manifest", "s/manifest.json", "--out", "u"]);
    assert_eq!(stdout.lines().count(), 10);

    let manifest_path = d.join("s/manifest.json");
    let manifest = Manifest::read(&manifest_path).unwrap();
    let snapshot = read_snapshot(&d.join("s/edges.tsv"), &d.join("s/attributes.tsv"), None, None).unwrap();
    let mut run = init_offline(snapshot, RunConfig { k: 5, l: 4, ..RunConfig::default() }).unwrap();
    for p in manifest.delta_paths(&manifest_path) {
        run = run.step_online(&read_delta(&p, manifest.nodes, manifest.attributes).unwrap()).unwrap();
    }
    let from_cli = read_embedding(&d.join("u/embedding.tsv")).unwrap();
    assert_eq!(from_cli, run.embedding);
    let cp = EmbeddingRun::load_checkpoint(&d.join("u/checkpoint.json")).unwrap();
    assert_eq!(cp.step, 10);
    assert_eq!(cp.embedding, run.embedding);
}

#[test]
fn synth_writes_a_readable_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["synth", "--out", "s", "--n", "90", "--blocks", "3", "--steps", "4", "--sbm-seed", "2"]);
    let m = Manifest::read(&d.join("s/manifest.json")).unwrap();
    assert_eq!((m.nodes, m.deltas.len()), (90, 4));
    let labels = read_labels(&d.join("s/labels.tsv"), Some(90)).unwrap();
    assert_eq!(labels.iter().max(), Some(&2));
    let spec = m.spec.expect("spec recorded");
    assert_eq!((spec.n, spec.seed), (90, 2));
}

#[test]
fn bench_writes_two_rows_per_step() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["bench", "--n", "80", "--steps", "4", "--k", "3", "--l", "3", "--out", "t.csv"]);
    let csv = std::fs::read_to_string(d.join("t.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 8);
    assert_eq!(rows.iter().filter(|r| r.contains(",online,")).count(), 4);
    assert_eq!(rows.iter().filter(|r| r.contains(",offline,")).count(), 4);
}

#[test]
fn eval_matches_the_library() {
    let dir = fixture("1");
    let d = dir.path();
    let json = ok(d, &["eval", "--embedding", "e/embedding.tsv", "--labels", "s/labels.tsv", "--task", "cluster", "--seed", "4"]);
    let rows: serde_json::Value = serde_json::from_str(&json).unwrap();
    let y = read_embedding(&d.join("e/embedding.tsv")).unwrap();
    let labels = read_labels(&d.join("s/labels.tsv"), Some(y.nrows())).unwrap();
    let km = kmeans(&y, 3, DEFAULT_RESTARTS, 4).unwrap();
    let (acc, nmi) = clustering_metrics(&km.assignments, &labels).unwrap();
    assert_eq!(rows[0]["metric"], "acc");
    assert_eq!(rows[0]["value"].as_f64().unwrap(), acc);
    assert_eq!(rows[1]["value"].as_f64().unwrap(), nmi);
}

#[test]
fn sweep_respects_twice_k() {
    let dir = fixture("1");
    let d = dir.path();
    // k = 5 allows only l = 10
    ok(d, &["eval", "--sweep", "--checkpoint", "e/checkpoint.json", "--labels", "s/labels.tsv", "--task", "classify", "--folds", "3", "--csv", "m.csv", "--out", "m.json"]);
    let csv = std::fs::read_to_string(d.join("m.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    assert!(csv.lines().skip(1).all(|l| l.split(',').nth(3) == Some("10")));
}

#[test]
fn config_file_and_flags_layer() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("c.json"), r#"{"k": 7, "l": 3, "seed": 9}"#).unwrap();
    let shown = ok(d, &["embed", "--graph", "g", "--attrs", "a", "--out", "o", "--config", "c.json", "--l", "5", "--show-config"]);
    let v: serde_json::Value = serde_json::from_str(&shown).unwrap();
    assert_eq!((v["k"].as_u64(), v["l"].as_u64(), v["seed"].as_u64()), (Some(7), Some(5), Some(9)));
}
