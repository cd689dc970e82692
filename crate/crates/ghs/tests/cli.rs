//! End-to-end tests of the `ghs` binary: every subcommand run against real
//! files in a temp directory, plus the most important failure modes.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ghs::dataio::{write_vectors, VectorFormat};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ghs"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawning the ghs binary")
}

fn assert_ok(out: &Output, what: &str) {
    assert!(
        out.status.success(),
        "{what} failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

/// Three separated clusters, written as fvecs (f32-exact values), plus a
/// matching label file.
fn write_dataset(dir: &Path, n: usize, d: usize, seed: u64) -> (PathBuf, PathBuf) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = DMatrix::from_fn(n, d, |i, _| {
        let center = (i % 3) as f64 * 8.0;
        // Quantize so the f32 narrowing in fvecs is exact.
        (center + rng.gen_range(-1.0..1.0) * 128.0).round() / 128.0
    });
    let data = dir.join("data.fvecs");
    write_vectors(&data, VectorFormat::Fvecs, &x).unwrap();
    let labels = dir.join("labels.csv");
    let text: String = (0..n).map(|i| format!("{}\n", i % 3)).collect();
    std::fs::write(&labels, text).unwrap();
    (data, labels)
}

#[test]
fn train_encode_query_eval_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let (data, _) = write_dataset(dir.path(), 300, 12, 1);
    let model = dir.path().join("model.ghs");
    let codes = dir.path().join("base.ghsc");

    let out = run(&[
        "train",
        "--input", data.to_str().unwrap(),
        "--bits", "16",
        "--method", "dd",
        "--max-iter", "10",
        "--seed", "7",
        "--out", model.to_str().unwrap(),
    ]);
    assert_ok(&out, "train");
    assert!(model.exists());

    let out = run(&[
        "encode",
        "--input", data.to_str().unwrap(),
        "--model", model.to_str().unwrap(),
        "--out", codes.to_str().unwrap(),
    ]);
    assert_ok(&out, "encode");

    // Query with the training file itself: the very first result must be
    // index 0 at distance 0 (row 0's own code ties at distance 0 and ties
    // break by ascending index).
    let out = run(&[
        "query",
        "--input", data.to_str().unwrap(),
        "--model", model.to_str().unwrap(),
        "--codes", codes.to_str().unwrap(),
        "--k", "3",
    ]);
    assert_ok(&out, "query");
    let stdout = String::from_utf8_lossy(&out.stdout);
    let first_line = stdout.lines().next().unwrap();
    assert!(
        first_line.starts_with("0:0"),
        "query row 0 should retrieve index 0 at distance 0 first, got: {first_line}"
    );
    assert_eq!(stdout.lines().count(), 300);
    for line in stdout.lines() {
        assert_eq!(line.split(' ').count(), 3);
    }

    // Capture each query's single top-ranked neighbor for the eval check
    // below.
    let out = run(&[
        "query",
        "--input", data.to_str().unwrap(),
        "--model", model.to_str().unwrap(),
        "--codes", codes.to_str().unwrap(),
        "--k", "1",
    ]);
    assert_ok(&out, "query k=1");
    let top1: Vec<String> = String::from_utf8_lossy(&out.stdout)
        .lines()
        .map(|line| line.split(':').next().unwrap().to_string())
        .collect();
    assert_eq!(top1.len(), 300);

    // Self-evaluation: codes against their own vectors.
    let out = run(&[
        "eval",
        "--base-codes", codes.to_str().unwrap(),
        "--query-codes", codes.to_str().unwrap(),
        "--base-vectors", data.to_str().unwrap(),
        "--query-vectors", data.to_str().unwrap(),
        "--radius", "2",
    ]);
    assert_ok(&out, "eval");
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("map="), "eval output missing metrics: {stdout}");

    // Explicit ground-truth file: each query's truth is its own top-ranked
    // neighbor as reported by `query`. Both commands order by Hamming
    // distance with ties broken by index, so MAP is exactly 1 precisely when
    // the two rankings agree.
    let gt = dir.path().join("truth.txt");
    let text: String = top1.iter().map(|idx| format!("{idx}\n")).collect();
    std::fs::write(&gt, text).unwrap();
    let out = run(&[
        "eval",
        "--base-codes", codes.to_str().unwrap(),
        "--query-codes", codes.to_str().unwrap(),
        "--ground-truth", gt.to_str().unwrap(),
    ]);
    assert_ok(&out, "eval with ground-truth file");
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(
        stdout.contains("map=1.000000"),
        "truth built from query's own top-1 should score MAP 1, got: {stdout}"
    );
}

#[test]
fn bench_and_sweep_emit_csv() {
    let dir = tempfile::tempdir().unwrap();
    let (data, _) = write_dataset(dir.path(), 400, 10, 2);
    let model = dir.path().join("model.ghs");

    let out = run(&[
        "bench",
        "--input", data.to_str().unwrap(),
        "--bits", "8",
        "--method", "di",
        "--queries", "40",
        "--seed", "3",
        "--out", model.to_str().unwrap(),
    ]);
    assert_ok(&out, "bench");
    let stdout = String::from_utf8_lossy(&out.stdout);
    let mut lines = stdout.lines();
    assert_eq!(
        lines.next().unwrap(),
        "method,c,map,precision,recall,f1,radius,n,seed"
    );
    let row = lines.next().unwrap();
    assert!(row.starts_with("di,8,"), "unexpected bench row: {row}");

    let out = run(&[
        "sweep",
        "--input", data.to_str().unwrap(),
        "--bits", "8",
        "--method", "dd",
        "--max-iter", "5",
        "--queries", "40",
        "--seed", "3",
        "--rs-grid", "1,2",
        "--rho-grid", "1",
        "--out", model.to_str().unwrap(),
    ]);
    assert_ok(&out, "sweep");
    let stdout = String::from_utf8_lossy(&out.stdout);
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(lines[0], "method,c,map,precision,recall,f1,radius,n,seed,rs,rho");
    assert_eq!(lines.len(), 3, "expected header + 2 grid rows: {stdout}");
    assert!(lines[1].ends_with(",1,1"), "first sweep row: {}", lines[1]);
    assert!(lines[2].ends_with(",2,1"), "second sweep row: {}", lines[2]);
}

#[test]
fn supervised_training_reads_labels() {
    let dir = tempfile::tempdir().unwrap();
    let (data, labels) = write_dataset(dir.path(), 240, 8, 4);
    let model = dir.path().join("sup.ghs");
    let out = run(&[
        "train",
        "--input", data.to_str().unwrap(),
        "--bits", "8",
        "--method", "dd",
        "--max-iter", "8",
        "--supervised",
        "--labels", labels.to_str().unwrap(),
        "--out", model.to_str().unwrap(),
    ]);
    assert_ok(&out, "supervised train");
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(
        stderr.contains("canonical correlations"),
        "supervised run should report correlations: {stderr}"
    );

    // Missing labels must fail fast with a helpful message.
    let out = run(&[
        "train",
        "--input", data.to_str().unwrap(),
        "--bits", "8",
        "--supervised",
        "--out", model.to_str().unwrap(),
    ]);
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("--labels"), "unhelpful error: {stderr}");
}

#[test]
fn determinism_across_invocations() {
    let dir = tempfile::tempdir().unwrap();
    let (data, _) = write_dataset(dir.path(), 200, 8, 5);
    let m1 = dir.path().join("m1.ghs");
    let m2 = dir.path().join("m2.ghs");
    for (out_path, threads) in [(&m1, "1"), (&m2, "2")] {
        let out = run(&[
            "--threads", threads,
            "train",
            "--input", data.to_str().unwrap(),
            "--bits", "16",
            "--method", "dd",
            "--max-iter", "12",
            "--seed", "11",
            "--out", out_path.to_str().unwrap(),
        ]);
        assert_ok(&out, "train for determinism");
    }
    // Same seed, different thread counts: byte-identical model files.
    assert_eq!(
        std::fs::read(&m1).unwrap(),
        std::fs::read(&m2).unwrap(),
        "thread count changed the trained model"
    );
}

#[test]
fn malformed_inputs_fail_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.fvecs");
    std::fs::write(&bad, b"\x10\x00\x00\x00short").unwrap();
    let model = dir.path().join("m.ghs");
    let out = run(&[
        "train",
        "--input", bad.to_str().unwrap(),
        "--out", model.to_str().unwrap(),
    ]);
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(
        stderr.contains("bad.fvecs"),
        "error should name the offending file: {stderr}"
    );

    // Unknown method.
    let (data, _) = write_dataset(dir.path(), 60, 4, 6);
    let out = run(&[
        "train",
        "--input", data.to_str().unwrap(),
        "--method", "kmeans",
        "--out", model.to_str().unwrap(),
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("kmeans"));
}
