use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn hge(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hge"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(out: Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn error_line(out: &Output) -> serde_json::Value {
    let stderr = String::from_utf8_lossy(&out.stderr);
    let last = stderr.lines().last().expect("an error line");
    serde_json::from_str(last).expect("error line is json")
}

/// Temp dir holding a config over the bundled fixture.
fn workspace(extra: &str) -> TempDir {
    let dir = tempfile::tempdir().unwrap();
    let cfg = format!(
        r#"{{
  "seed": 1,
  "data": {{"interactions": "{}", "hierarchy": "{}", "threshold": 1, "k_core": 2}},
  "split": {{"cold_fraction": 0.3, "downsample": 0.5}},
  "model": {{"d": 8, "h": 4}},
  "train": {{"epochs": 5, "batch_size": 64}},
  "eval": {{"ks": [5, 10]}}{extra}
}}"#,
        fixture("interactions.csv").display(),
        fixture("hierarchy.csv").display()
    );
    fs::write(dir.path().join("run.json"), cfg).unwrap();
    dir
}

fn metric(stdout: &str, name: &str) -> f64 {
    stdout
        .lines()
        .find_map(|l| l.strip_prefix(name)?.strip_prefix('\t')?.parse().ok())
        .unwrap_or_else(|| panic!("no `{name}` in {stdout}"))
}

#[test]
fn fixture_has_two_hundred_interactions() {
    let text = fs::read_to_string(fixture("interactions.csv")).unwrap();
    assert_eq!(text.lines().count(), 201);
}

#[test]
fn prepare_train_evaluate() {
    let ws = workspace("");
    let d = ws.path();
    let prep = ok(hge(d, &["--config", "run.json", "--out", "prep", "prepare"]));
    assert!(metric(&prep, "cold_items") >= 1.0);
    fs::write(
        d.join("train.json"),
        r#"{"seed": 1, "data": {"prepared": "prep"}, "model": {"d": 8, "h": 4},
            "train": {"epochs": 5, "batch_size": 64}, "eval": {"ks": [5, 10]}}"#,
    )
    .unwrap();
    ok(hge(d, &["--config", "train.json", "--out", "tr", "train"]));
    let stdout = ok(hge(
        d,
        &["--config", "train.json", "--out", "ev", "--tsv", "evaluate", "--checkpoint", "tr/checkpoint.bin"],
    ));
    let hr = metric(&stdout, "hit_rate_at_10");
    assert!((0.0..=1.0).contains(&hr));
    for f in ["tr/config.json", "tr/loss_history.json", "ev/config.json", "ev/report.json", "ev/report.tsv", "ev/clusters.json"] {
        assert!(d.join(f).is_file(), "{f} missing");
    }
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.join("ev/report.json")).unwrap()).unwrap();
    assert_eq!(report["model"], "hge");
    assert_eq!(report["config"]["model"]["d"], 8);
}

#[test]
fn train_and_evaluate_are_byte_identical() {
    let ws = workspace("");
    let d = ws.path();
    for out in ["a", "b"] {
        ok(hge(d, &["--config", "run.json", "--out", out, "train"]));
        let ckpt = format!("{out}/checkpoint.bin");
        ok(hge(d, &["--config", "run.json", "--out", out, "evaluate", "--checkpoint", &ckpt]));
    }
    for f in ["checkpoint.bin", "loss_history.json", "report.json", "clusters.json", "config.json"] {
        assert_eq!(fs::read(d.join("a").join(f)).unwrap(), fs::read(d.join("b").join(f)).unwrap(), "{f}");
    }
    // the resolved config alone reproduces the run
    ok(hge(d, &["--config", "a/config.json", "--out", "c", "train"]));
    assert_eq!(fs::read(d.join("a/checkpoint.bin")).unwrap(), fs::read(d.join("c/checkpoint.bin")).unwrap());
    // thread count does not change the outputs
    ok(hge(d, &["--config", "run.json", "--out", "t", "--threads", "3", "train"]));
    assert_eq!(fs::read(d.join("a/checkpoint.bin")).unwrap(), fs::read(d.join("t/checkpoint.bin")).unwrap());
}

#[test]
fn seed_flag_overrides_the_config() {
    let ws = workspace("");
    let d = ws.path();
    ok(hge(d, &["--config", "run.json", "--out", "s", "--seed", "42", "--deterministic", "train"]));
    let cfg: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.join("s/config.json")).unwrap()).unwrap();
    assert_eq!(cfg["seed"], 42);
    assert_eq!(cfg["split"]["seed"], 42);
}

#[test]
fn missing_checkpoint_exits_2() {
    let ws = workspace("");
    let out = hge(ws.path(), &["--config", "run.json", "evaluate", "--checkpoint", "missing.bin"]);
    assert_eq!(out.status.code(), Some(2));
    let e = error_line(&out);
    assert_eq!(e["kind"], "io");
    assert!(e["error"].as_str().unwrap().contains("missing.bin"));
}

#[test]
fn missing_input_exits_2() {
    let ws = workspace("");
    fs::write(
        ws.path().join("gone.json"),
        r#"{"data": {"interactions": "nope.csv", "hierarchy": "nope.csv"}}"#,
    )
    .unwrap();
    let out = hge(ws.path(), &["--config", "gone.json", "prepare"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(error_line(&out)["error"].as_str().unwrap().contains("nope.csv"));
    let out = hge(ws.path(), &["--config", "absent.json", "train"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn schema_violations_exit_3() {
    let ws = workspace("");
    fs::write(ws.path().join("bad.json"), r#"{"train": {"learning_rat": 0.1}}"#).unwrap();
    let out = hge(ws.path(), &["--config", "bad.json", "train"]);
    assert_eq!(out.status.code(), Some(3));
    let e = error_line(&out);
    assert_eq!(e["kind"], "config");
    assert!(e["error"].as_str().unwrap().contains("learning_rat"));

    fs::write(ws.path().join("typed.json"), r#"{"model": {"d": "large"}}"#).unwrap();
    let out = hge(ws.path(), &["--config", "typed.json", "train"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(error_line(&out)["error"].as_str().unwrap().contains("usize"));
}

#[test]
fn malformed_rows_exit_4() {
    let ws = workspace("");
    let d = ws.path();
    let mut text = fs::read_to_string(fixture("interactions.csv")).unwrap();
    text.push_str("user00000,item00001,yesterday,1\n");
    fs::write(d.join("bad.csv"), text).unwrap();
    fs::write(
        d.join("bad.json"),
        format!(
            r#"{{"data": {{"interactions": "bad.csv", "hierarchy": "{}", "threshold": 1, "k_core": 2}}}}"#,
            fixture("hierarchy.csv").display()
        ),
    )
    .unwrap();
    let out = hge(d, &["--config", "bad.json", "prepare"]);
    assert_eq!(out.status.code(), Some(4));
    assert_eq!(error_line(&out)["kind"], "parse");
}

#[test]
fn synth_is_seeded() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("s.json"), r#"{"synth": {"n_users": 30, "n_items": 40, "branching": [2, 2]}}"#).unwrap();
    for out in ["x", "y", "z"] {
        let seed = if out == "z" { "8" } else { "7" };
        ok(hge(d, &["--config", "s.json", "--seed", seed, "--out", out, "synth"]));
    }
    let read = |p: &str| fs::read(d.join(p)).unwrap();
    assert_eq!(read("x/interactions.csv"), read("y/interactions.csv"));
    assert_eq!(read("x/hierarchy.csv"), read("y/hierarchy.csv"));
    assert_ne!(read("x/interactions.csv"), read("z/interactions.csv"));
}

#[test]
fn grid_benchmark_and_export() {
    let ws = workspace(
        r#",
  "grid": {"dims": [4, 8], "learning_rates": [0.001, 0.01, 0.1], "k": 5},
  "benchmark": {"dims": [4], "timed_epochs": 3}"#,
    );
    let d = ws.path();
    ok(hge(d, &["--config", "run.json", "--out", "g", "--tsv", "grid"]));
    assert_eq!(fs::read_to_string(d.join("g/grid.tsv")).unwrap().lines().count(), 7);
    let best: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.join("g/best_config.json")).unwrap()).unwrap();
    assert!([4, 8].contains(&best["model"]["d"].as_u64().unwrap()));

    let bench = ok(hge(d, &["--config", "run.json", "--out", "b", "benchmark"]));
    assert!(bench.starts_with("d\tmf_epoch_seconds\thge_epoch_seconds\tratio\n"));
    assert!(d.join("b/timing.json").is_file());

    ok(hge(d, &["--config", "run.json", "--out", "t", "train"]));
    ok(hge(d, &["--config", "run.json", "--out", "t", "export", "--checkpoint", "t/checkpoint.bin"]));
    let tsv = fs::read_to_string(d.join("t/embeddings.tsv")).unwrap();
    let header = tsv.lines().next().unwrap();
    assert_eq!(header, "item_id\tlevel_1\tlevel_2\te_1\te_2\te_3\te_4\te_5\te_6\te_7\te_8");
    assert!(tsv.lines().skip(1).all(|l| l.split('\t').count() == 11));
}
