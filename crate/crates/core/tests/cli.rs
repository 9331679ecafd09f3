use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_orthoplan"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = run(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn pipeline(dir: &Path) {
    let data = ["--corpus", "c.jsonl", "--catalog", "cat.jsonl", "--split", "s.json"];
    ok(dir, &["gen-synth", "--n", "60", "--labels", "5", "--seed", "11", "--corpus", "c.jsonl", "--catalog", "cat.jsonl"]);
    ok(dir, &[&["build-features", "--vocab", "v.txt"][..], &data].concat());
    ok(
        dir,
        &[
            &["train-classifier", "--vocab", "v.txt", "--hidden", "8,16", "--epochs", "20"][..],
            &["--classifier", "m.json", "--report", "grid.json"],
            &data,
        ]
        .concat(),
    );
    ok(dir, &[&["train-ranker", "--ranker", "r.json", "--report", "rgrid.json"][..], &data].concat());
}

#[test]
fn gen_synth_writes_one_line_per_certificate() {
    let tmp = TempDir::new().unwrap();
    ok(
        tmp.path(),
        &["gen-synth", "--n", "990", "--labels", "151", "--seed", "7", "--corpus", "a.jsonl", "--catalog", "a.cat"],
    );
    ok(
        tmp.path(),
        &["gen-synth", "--n", "990", "--labels", "151", "--seed", "7", "--corpus", "b.jsonl", "--catalog", "b.cat"],
    );
    let a = fs::read(tmp.path().join("a.jsonl")).unwrap();
    assert_eq!(a.iter().filter(|&&b| b == b'\n').count(), 990);
    assert_eq!(a, fs::read(tmp.path().join("b.jsonl")).unwrap());
    assert_eq!(
        fs::read(tmp.path().join("a.cat")).unwrap(),
        fs::read(tmp.path().join("b.cat")).unwrap()
    );
}

#[test]
fn usage_errors_exit_one() {
    let tmp = TempDir::new().unwrap();
    let out = run(tmp.path(), &["gen-synth", "--noise", "1.5", "--corpus", "c", "--catalog", "k"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!tmp.path().join("c").exists());
    assert_eq!(run(tmp.path(), &["no-such-command"]).status.code(), Some(1));
    assert_eq!(run(tmp.path(), &["gen-synth", "--n", "many"]).status.code(), Some(1));
    assert_eq!(run(tmp.path(), &["--help"]).status.code(), Some(0));
    let out = run(tmp.path(), &["train-classifier", "--features", "ook", "--corpus", "c", "--split", "s", "--classifier", "m"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn missing_corpus_is_a_data_error() {
    let tmp = TempDir::new().unwrap();
    let out = run(
        tmp.path(),
        &["train-classifier", "--corpus", "absent.jsonl", "--split", "s", "--vocab", "v", "--classifier", "m"],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("absent.jsonl"));
}

#[test]
fn grid_reports_have_one_row_per_point() {
    let tmp = TempDir::new().unwrap();
    pipeline(tmp.path());
    let grid = fs::read_to_string(tmp.path().join("grid.json")).unwrap();
    let body: serde_json::Value = serde_json::from_str(grid.split_once('\n').unwrap().1).unwrap();
    assert_eq!(body["entries"].as_array().unwrap().len(), 2);
    let rgrid = fs::read_to_string(tmp.path().join("rgrid.json")).unwrap();
    let body: serde_json::Value = serde_json::from_str(rgrid.split_once('\n').unwrap().1).unwrap();
    assert_eq!(body["entries"].as_array().unwrap().len(), 8);
}

#[test]
fn predict_edge_cases() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    pipeline(d);
    let models = ["--vocab", "v.txt", "--classifier", "m.json", "--ranker", "r.json"];

    let out = run(d, &[&["predict", "--text", "   "][..], &models].concat());
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    assert!(String::from_utf8_lossy(&out.stderr).contains("empty"));

    fs::write(d.join("bad.json"), "orthoplan-mlp v1\n{ not json").unwrap();
    let out = run(d, &["predict", "--text", "x", "--vocab", "v.txt", "--classifier", "bad.json", "--ranker", "r.json"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));

    fs::write(d.join("v2.txt"), "orthoplan-vocabulary v1\nmin_count\t1\nscheme\twhitespace\nzz\t0\n").unwrap();
    let out = run(d, &["predict", "--text", "x", "--vocab", "v2.txt", "--classifier", "m.json", "--ranker", "r.json"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn predict_orders_by_severity() {
    // Saturating setup: few labels, mostly single-problem certificates, severity g_j = j.
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    fs::write(
        d.join("run.toml"),
        r#"
min_count = 2
[paths]
corpus = "c.jsonl"
catalog = "cat.jsonl"
split = "s.json"
vocab = "v.txt"
classifier = "m.json"
ranker = "r.json"
[train]
hidden_grid = [16]
learning_rate = 0.01
max_epochs = 200
patience = 30
[synth]
n_certificates = 400
n_labels = 6
problems_per_cert_mean = 2.0
filler_per_label = 0
rng_seed = 5
[synth.severity]
g0 = 0.0
g1 = 1.0
g2 = 2.0
g3 = 3.0
g4 = 4.0
g5 = 5.0
"#,
    )
    .unwrap();
    let cfg = ["--config", "run.toml"];
    for cmd in ["gen-synth", "build-features", "train-classifier", "train-ranker"] {
        ok(d, &[&[cmd][..], &cfg].concat());
    }
    let plan = ok(d, &["predict", "--config", "run.toml", "--text=- kw_g1_0 kw_g1_1 kw_g1_2\n- kw_g5_0 kw_g5_1 kw_g5_2"]);
    let rows: Vec<Vec<&str>> = plan.lines().map(|l| l.split('\t').collect()).collect();
    assert_eq!(rows.len(), 2, "{plan}");
    assert_eq!(rows[0][..3], ["1", "g5", "sx_g5"]);
    assert_eq!(rows[1][..3], ["2", "g1", "sx_g1"]);
}

#[test]
fn flags_override_config() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    fs::write(d.join("run.toml"), "[paths]\ncorpus = \"from_config.jsonl\"\ncatalog = \"k.jsonl\"\n[synth]\nn_certificates = 12\nn_labels = 4\n").unwrap();
    ok(d, &["gen-synth", "--config", "run.toml", "--corpus", "from_flag.jsonl", "--n", "9"]);
    assert!(!d.join("from_config.jsonl").exists());
    let text = fs::read_to_string(d.join("from_flag.jsonl")).unwrap();
    assert_eq!(text.lines().count(), 9);
    assert_eq!(run(d, &["gen-synth", "--config", "missing.toml"]).status.code(), Some(1));
}

#[test]
fn evaluate_reports_both_modes_and_flag() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    pipeline(d);
    let args = [
        "evaluate", "--corpus", "c.jsonl", "--catalog", "cat.jsonl", "--split", "s.json", "--vocab", "v.txt",
        "--classifier", "m.json", "--ranker", "r.json", "--partition", "validation", "--report", "e.json",
    ];
    let out = ok(d, &args);
    assert!(out.contains("example-based") && out.contains("micro") && out.contains("exceeds 0.4"));
    let text = fs::read_to_string(d.join("e.json")).unwrap();
    let body: serde_json::Value = serde_json::from_str(text.split_once('\n').unwrap().1).unwrap();
    let rho = body["ranking"]["mean_rho"].as_f64().unwrap();
    assert_eq!(body["ranking"]["positive_correlation"].as_bool().unwrap(), rho > 0.4);
    ok(d, &[&args[..], &["--rank-input", "predicted"]].concat());
    let out = run(d, &["evaluate", "--corpus", "c.jsonl", "--split", "s.json", "--ranker", "r.json", "--rank-input", "predicted"]);
    assert_eq!(out.status.code(), Some(1));
}
