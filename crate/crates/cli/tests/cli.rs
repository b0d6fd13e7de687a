use std::fs;
use std::io::Write;
use std::path::Path;
use std::process::{Command, Output, Stdio};

use tempfile::TempDir;

const CORPUS: &str = "1 1:3 2:1 4:2\n0 2:2 3:5\n1 1:1 5:4 6:2\n1 3:2 4:1 6:3\n0 5:2 2:2\n";

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_topicgraph"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn corpus_file(dir: &Path) -> String {
    let p = dir.join("corpus.libsvm");
    fs::write(&p, CORPUS).unwrap();
    p.to_str().unwrap().to_string()
}

fn train(dir: &Path, out: &str, extra: &[&str]) -> Output {
    let input = corpus_file(dir);
    let out_dir = dir.join(out);
    let mut args = vec![
        "train",
        "--input",
        &input,
        "--topics",
        "3",
        "--iters",
        "6",
        "--parts",
        "2",
        "--seed",
        "11",
        "--omit-timings",
        "--output-dir",
        out_dir.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    run(&args)
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    assert_eq!(run(&["train", "--topics", "3"]).status.code(), Some(1));
    let missing = dir.path().join("absent.libsvm");
    let o = run(&["train", "--input", missing.to_str().unwrap(), "--topics", "3"]);
    assert_eq!(o.status.code(), Some(2));
    let o = train(dir.path(), "x", &["--delta-agg", "--exclude-start", "2"]);
    assert_eq!(o.status.code(), Some(1), "{}", String::from_utf8_lossy(&o.stderr));
    let o = train(dir.path(), "y", &["--partitioner", "bogus"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn train_output_is_reproducible() {
    let dir = TempDir::new().unwrap();
    let a = train(dir.path(), "a", &[]);
    let b = train(dir.path(), "b", &[]);
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
    let lines: Vec<serde_json::Value> = stdout(&a)
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 6);
    // History records keep wall-clock timings; the model sections must match.
    let model = |d: &str| {
        let text = fs::read_to_string(dir.path().join(d).join("model.ckpt")).unwrap();
        text.split("[history]").next().unwrap().to_string()
    };
    assert_eq!(model("a"), model("b"));
}

#[test]
fn infer_and_dedup_read_a_trained_model() {
    let dir = TempDir::new().unwrap();
    assert!(train(dir.path(), "m", &[]).status.success());
    let model = dir.path().join("m/model.ckpt");
    let model = model.to_str().unwrap();

    let mut child = bin()
        .args(["infer", "--model", model, "--iters", "20"])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(b"1:2 3:1\n\n2:4\n").unwrap();
    let o = child.wait_with_output().unwrap();
    assert!(o.status.success());
    let text = stdout(&o);
    let rows: Vec<Vec<&str>> = text.lines().map(|l| l.split('\t').collect()).collect();
    assert_eq!(rows.len(), 2);
    for row in &rows {
        assert_eq!(row.len(), 4);
        let sum: f64 = row[1..].iter().map(|c| c.parse::<f64>().unwrap()).sum();
        assert!((sum - 1.0).abs() < 1e-9);
    }

    let merged = dir.path().join("merged.ckpt");
    let o = run(&["dedup", "--model", model, "--threshold", "2", "--output", merged.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).starts_with("survivor\tabsorbed"));
    assert!(merged.exists());
    assert_eq!(run(&["dedup", "--model", model, "--threshold", "3"]).status.code(), Some(1));
}

#[test]
fn partition_stats_and_bench_tables() {
    let o = run(&[
        "partition-stats",
        "--power-law-edges",
        "2000",
        "--partitioners",
        "random,dbh+",
        "--parts",
        "2,4",
    ]);
    assert!(o.status.success());
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("partitioner\tparts"));
    assert_eq!(lines.len(), 5);

    let o = run(&[
        "bench",
        "--synthetic-docs",
        "50",
        "--synthetic-vocab",
        "200",
        "--synthetic-doc-len",
        "20",
        "--topics",
        "5",
        "--kernels",
        "zen,sparse",
        "--iters",
        "2",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(
        lines[0],
        "kernel\titer\tsample_seconds\titer_seconds\ttokens_sampled\ttopics_changed"
    );
    assert_eq!(lines.len(), 5);
}
