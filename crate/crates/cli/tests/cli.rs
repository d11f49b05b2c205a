use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures")
}

fn mpe(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mpe"))
        .args(args)
        .current_dir(dir)
        .env_remove("MPE_DATA_DIR")
        .output()
        .expect("run mpe")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = mpe(dir, args);
    assert!(
        out.status.success(),
        "mpe {args:?} failed: {}\n{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn captions_args(extra: &[&'static str]) -> Vec<String> {
    let f = fixtures();
    let mut v = vec![
        "--captions".to_string(),
        f.join("train.tsv").display().to_string(),
        "--dev-captions".to_string(),
        f.join("dev.tsv").display().to_string(),
    ];
    v.extend(extra.iter().map(|s| s.to_string()));
    v
}

fn build(dir: &Path, split: &str, out: &str) {
    let mut args = vec!["build-dataset".to_string()];
    args.extend(captions_args(&["--n-items", "100", "--split"]));
    args.extend([split.to_string(), "--out".into(), out.into()]);
    let args: Vec<&str> = args.iter().map(String::as_str).collect();
    ok(dir, &args);
}

fn item_ids(path: &Path) -> Vec<String> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str::<Value>(l).unwrap()["id"].as_str().unwrap().to_string())
        .collect()
}

/// Writes clear-majority judgments cycling through E, N, C.
fn write_judgments(ids: &[String], path: &Path) {
    let labels = ["E", "N", "C"];
    let body: String = ids
        .iter()
        .enumerate()
        .map(|(k, id)| {
            let g = labels[k % 3];
            format!("{id}\t{g},{g},{g},{g},N\n")
        })
        .collect();
    fs::write(path, body).unwrap();
}

fn labeled(dir: &Path, split: &str, out: &str) {
    let raw = format!("{split}.raw.jsonl");
    build(dir, split, &raw);
    let judg = dir.join(format!("{split}.judgments.tsv"));
    write_judgments(&item_ids(&dir.join(&raw)), &judg);
    fs::write(dir.join("none.tsv"), "").unwrap();
    ok(
        dir,
        &["adjudicate", "--items", &raw, "--judgments", judg.to_str().unwrap(), "--decisions", "none.tsv", "--out", out],
    );
}

#[test]
fn build_dataset_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    build(dir.path(), "train", "a.jsonl");
    build(dir.path(), "train", "b.jsonl");
    let a = fs::read(dir.path().join("a.jsonl")).unwrap();
    assert!(!a.is_empty());
    assert_eq!(a, fs::read(dir.path().join("b.jsonl")).unwrap());
    assert_eq!(a, fs::read(fixtures().join("golden_train_seed42.jsonl")).unwrap());
}

#[test]
fn manifest_records_inputs_config_and_outputs() {
    let dir = tempfile::tempdir().unwrap();
    build(dir.path(), "train", "items.jsonl");
    let m: Value = serde_json::from_slice(&fs::read(dir.path().join("items.jsonl.manifest.json")).unwrap()).unwrap();
    assert_eq!(m["command"], "build-dataset");
    assert_eq!(m["seed"], 42);
    assert_eq!(m["config"]["overlap_max"], 0.5);
    assert_eq!(m["inputs"].as_array().unwrap().len(), 2);
    assert_eq!(m["inputs"][0]["sha256"].as_str().unwrap().len(), 64);
    assert!(m["formats"]["items"].is_u64());
    assert!(m["outputs"][0]["path"].as_str().unwrap().ends_with("items.jsonl"));
}

#[test]
fn graph_file_feeds_dataset_generation() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["build-graph".to_string()];
    args.extend(captions_args(&["--out", "g.txt"]));
    let args: Vec<&str> = args.iter().map(String::as_str).collect();
    let summary = ok(dir.path(), &args);
    assert!(summary.contains("100 captions"), "{summary}");
    let mut args = vec!["build-dataset".to_string()];
    args.extend(captions_args(&["--graph", "g.txt", "--n-items", "100", "--out", "from_graph.jsonl"]));
    let args: Vec<&str> = args.iter().map(String::as_str).collect();
    ok(dir.path(), &args);
    assert_eq!(
        fs::read(dir.path().join("from_graph.jsonl")).unwrap(),
        fs::read(fixtures().join("golden_train_seed42.jsonl")).unwrap()
    );
}

#[test]
fn gradcheck_passes_for_every_model() {
    let dir = tempfile::tempdir().unwrap();
    for model in ["se", "lstm", "attention"] {
        let out = ok(dir.path(), &["gradcheck", "--model", model, "--dim", "8", "--seed", "7"]);
        assert!(out.lines().last().unwrap().starts_with("PASS"), "{out}");
    }
}

#[test]
fn gradcheck_fails_with_an_impossible_tolerance() {
    let dir = tempfile::tempdir().unwrap();
    let out = mpe(dir.path(), &["gradcheck", "--model", "se", "--tolerance", "1e-30", "--out", "gc.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL"));
    let v: Value = serde_json::from_slice(&fs::read(dir.path().join("gc.json")).unwrap()).unwrap();
    assert_eq!(v["passed"], false);
}

#[test]
fn vote_scores_items_with_pair_labels() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(
        d.join("items.jsonl"),
        ["E", "N", "C"]
            .iter()
            .enumerate()
            .map(|(i, g)| {
                format!(
                    "{{\"format_version\":1,\"id\":\"v{i}\",\"split\":\"dev\",\"scene_group\":\"g{i}\",\"premises\":[\"a\",\"b\",\"c\",\"d\"],\"hypothesis\":\"h\",\"gold_label\":\"{g}\"}}\n"
                )
            })
            .collect::<String>(),
    )
    .unwrap();
    fs::write(d.join("pairs.tsv"), "v0\tE,E,E,N\nv1\tE,E,C,C\nv2\tN,N,N,N\n").unwrap();
    let table = ok(d, &["vote", "--items", "items.jsonl", "--pairs", "pairs.tsv", "--out", "vote.json"]);
    assert!(table.contains("items scored"), "{table}");
    let v: Value = serde_json::from_slice(&fs::read(d.join("vote.json")).unwrap()).unwrap();
    assert_eq!(v["scored"], 3);
    // v0: E wins. v1: no majority, falls back to N. v2: N wins against gold C.
    assert!((v["majority_acc_strict"].as_f64().unwrap() - 1.0 / 3.0).abs() < 1e-12);
    assert!((v["majority_acc_neutral_fallback"].as_f64().unwrap() - 2.0 / 3.0).abs() < 1e-12);
}

#[test]
fn malformed_input_exits_one_and_names_file_and_line() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    build(d, "train", "items.jsonl");
    fs::write(d.join("pairs.tsv"), "train-0\tE,E,E\n").unwrap();
    let out = mpe(d, &["vote", "--items", "items.jsonl", "--pairs", "pairs.tsv", "--out", "vote.json"]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr(&out);
    assert!(err.contains("pairs.tsv:1:"), "{err}");
    assert!(!d.join("vote.json").exists());
    assert!(!d.join("vote.json.manifest.json").exists());
}

#[test]
fn unknown_flags_and_bad_values_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = mpe(dir.path(), &["vote", "--items", "x.jsonl", "--bogus"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("--bogus"));
    let out = mpe(dir.path(), &["gradcheck", "--model", "transformer"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("expected lstm, attention or se"), "{}", stderr(&out));
    let mut args = vec!["build-dataset".to_string()];
    args.extend(captions_args(&["--overlap-max", "1.5", "--out", "never.jsonl"]));
    let args: Vec<&str> = args.iter().map(String::as_str).collect();
    let out = mpe(dir.path(), &args);
    assert_eq!(out.status.code(), Some(1));
    assert!(!dir.path().join("never.jsonl").exists());
}

#[test]
fn missing_gold_labels_block_training_without_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    build(d, "train", "items.jsonl");
    let out = mpe(d, &["train", "--model", "se", "--train", "items.jsonl", "--epochs", "1", "--out", "m.ckpt"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("no gold label"), "{}", stderr(&out));
    assert!(fs::read_dir(d).unwrap().all(|e| !e.unwrap().file_name().to_string_lossy().starts_with("m.ckpt")));
}

#[test]
fn train_then_eval_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    labeled(d, "train", "train.jsonl");
    labeled(d, "dev", "dev.jsonl");
    let common = ["--train", "train.jsonl", "--dev", "dev.jsonl", "--epochs", "2", "--embed-dim", "8", "--hidden", "8", "--seed", "3"];
    let mut a = vec!["train", "--model", "se", "--out", "a.ckpt"];
    a.extend(common);
    ok(d, &a);
    let mut b = vec!["train", "--model", "se", "--out", "b.ckpt"];
    b.extend(common);
    ok(d, &b);
    assert_eq!(fs::read(d.join("a.ckpt")).unwrap(), fs::read(d.join("b.ckpt")).unwrap());
    let log = fs::read_to_string(d.join("a.ckpt.log.jsonl")).unwrap();
    assert_eq!(log.lines().count(), 2);
    assert!(d.join("a.ckpt.manifest.json").exists());

    let table = ok(d, &["eval", "--model", "a.ckpt", "--items", "dev.jsonl", "--out", "report.json", "--predictions", "preds.jsonl"]);
    assert!(table.starts_with("accuracy"), "{table}");
    let report: Value = serde_json::from_slice(&fs::read(d.join("report.json")).unwrap()).unwrap();
    let preds = fs::read_to_string(d.join("preds.jsonl")).unwrap();
    let n = preds.lines().count();
    assert_eq!(n, item_ids(&d.join("dev.jsonl")).len());
    let correct = preds
        .lines()
        .filter(|l| {
            let v: Value = serde_json::from_str(l).unwrap();
            v["gold"] == v["predicted"]
        })
        .count();
    assert!((report["accuracy"].as_f64().unwrap() - correct as f64 / n as f64).abs() < 1e-12);
}

#[test]
fn grid_and_pretraining_regimes_run() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    labeled(d, "train", "train.jsonl");
    labeled(d, "dev", "dev.jsonl");
    ok(
        d,
        &[
            "train", "--model", "attention", "--train", "train.jsonl", "--dev", "dev.jsonl", "--epochs", "1", "--embed-dim", "8", "--hidden", "4,8",
            "--lr", "0.01,0.001", "--out", "grid.ckpt",
        ],
    );
    let grid: Value = serde_json::from_slice(&fs::read(d.join("grid.ckpt.grid.json")).unwrap()).unwrap();
    assert_eq!(grid.as_array().unwrap().len(), 4);

    let out = mpe(d, &["train", "--model", "se", "--train", "train.jsonl", "--hidden", "4,8", "--out", "nodev.ckpt"]);
    assert_eq!(out.status.code(), Some(1));

    ok(
        d,
        &[
            "train", "--preset", "lstm-mpe", "--train", "train.jsonl", "--pretrain", "dev.jsonl", "--epochs", "1", "--embed-dim", "8", "--hidden", "8",
            "--out", "pre.ckpt",
        ],
    );
    let phases: Vec<String> = fs::read_to_string(d.join("pre.ckpt.log.jsonl"))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str::<Value>(l).unwrap()["phase"].as_str().unwrap().to_string())
        .collect();
    assert_eq!(phases, ["pretrain", "finetune"]);
}

#[test]
fn interactive_adjudication_saves_decisions() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    build(d, "train", "items.jsonl");
    let ids = item_ids(&d.join("items.jsonl"));
    let mut body = format!("{}\tE,E,E,C,C\n", ids[0]);
    for id in &ids[1..] {
        body.push_str(&format!("{id}\tN,N,N,N,N\n"));
    }
    fs::write(d.join("j.tsv"), body).unwrap();
    let mut child = Command::new(env!("CARGO_BIN_EXE_mpe"))
        .args(["adjudicate", "--items", "items.jsonl", "--judgments", "j.tsv", "--out", "adj.jsonl"])
        .current_dir(d)
        .stdin(std::process::Stdio::piped())
        .stdout(std::process::Stdio::piped())
        .stderr(std::process::Stdio::piped())
        .spawn()
        .unwrap();
    use std::io::Write;
    child.stdin.take().unwrap().write_all(b"C\n").unwrap();
    let out = child.wait_with_output().unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(fs::read_to_string(d.join("adj.jsonl.decisions.tsv")).unwrap(), format!("# item_id\tlabel\n{}\tC\n", ids[0]));
    let first: Value = serde_json::from_str(fs::read_to_string(d.join("adj.jsonl")).unwrap().lines().next().unwrap()).unwrap();
    assert_eq!(first["gold_label"], "C");
    let stats = ok(d, &["stats", "--items", "adj.jsonl"]);
    assert!(stats.contains("agreement"), "{stats}");
}

#[test]
fn data_dir_resolves_relative_paths() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    fs::create_dir(&data).unwrap();
    fs::copy(fixtures().join("train.tsv"), data.join("train.tsv")).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_mpe"))
        .args(["build-dataset", "--captions", "train.tsv", "--n-items", "5", "--out", "items.jsonl"])
        .current_dir(dir.path())
        .env("MPE_DATA_DIR", &data)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(data.join("items.jsonl").exists());
    assert!(data.join("items.jsonl.manifest.json").exists());
    assert!(!dir.path().join("items.jsonl").exists());
}
