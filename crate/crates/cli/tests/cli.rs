use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn fraclap(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fraclap"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = fraclap(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn read(path: &Path) -> String {
    fs::read_to_string(path).unwrap()
}

/// Rows of a CSV artifact after the hash comment and the header.
fn rows(path: &Path) -> Vec<Vec<String>> {
    let text = read(path);
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# manifest_sha256="));
    lines.next().unwrap();
    lines.map(|l| l.split(',').map(String::from).collect()).collect()
}

fn dir_arg(dir: &Path) -> String {
    dir.to_str().unwrap().to_string()
}

#[test]
fn sample_reports_small_ks_and_replays() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        ok(&[
            "sample",
            "--dim",
            "2",
            "--alpha",
            "1",
            "--seed",
            "3",
            "--out",
            &dir_arg(dir),
        ]);
    }
    let ks = rows(&a.join("ks_report.csv"));
    assert_eq!(ks.len(), 2);
    for row in &ks {
        assert_eq!(row[3], "100000");
        assert!(row[4].parse::<f64>().unwrap() < 0.01, "{row:?}");
    }
    assert_eq!(
        fs::read(a.join("samples.csv")).unwrap(),
        fs::read(b.join("samples.csv")).unwrap()
    );
    assert_eq!(rows(&a.join("samples.csv")).len(), 100_000);
}

#[test]
fn out_of_range_alpha_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = fraclap(&["sample", "--alpha", "2", "--out", &dir_arg(tmp.path())]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("alpha"));
    let out = fraclap(&["sample", "--direction", "sideways"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn dataset_is_reproducible_and_carries_a_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        ok(&[
            "dataset",
            "--example",
            "1",
            "--dim",
            "5",
            "--points",
            "10",
            "--paths",
            "10",
            "--out",
            &dir_arg(dir),
        ]);
    }
    let data = a.join("dataset.csv");
    assert_eq!(fs::read(&data).unwrap(), fs::read(b.join("dataset.csv")).unwrap());
    let text = read(&data);
    assert_eq!(text.lines().nth(1).unwrap(), "x_1,x_2,x_3,x_4,x_5,u_hat");
    assert_eq!(rows(&data).len(), 10);

    let manifest: serde_json::Value = serde_json::from_str(&read(&a.join("dataset.manifest.json"))).unwrap();
    let hash = manifest["manifest_sha256"].as_str().unwrap();
    assert!(text.starts_with(&format!("# manifest_sha256={hash}\n")));
    assert_eq!(manifest["config"]["paths"], 10);
    assert_eq!(manifest["config"]["dim"], 5);
    assert!(manifest["artifacts"]["dataset.csv"].is_string());
    assert!(manifest["elapsed_seconds"].as_f64().unwrap() >= 0.0);
}

fn train_small(dir: &Path, extra: &[&str]) {
    let d = dir_arg(dir);
    let mut args = vec!["dataset", "--points", "40", "--paths", "10", "--out", &d];
    args.extend(extra);
    ok(&args);
    let mut args = vec!["train", "--iters", "15", "--batch", "8", "--out", &d];
    args.extend(extra);
    ok(&args);
}

#[test]
fn train_and_evaluate_pipeline() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    train_small(dir, &["--example", "1", "--alpha", "1.5", "--radial-loss"]);

    let ckpt: serde_json::Value = serde_json::from_str(&read(&dir.join("checkpoint.json"))).unwrap();
    assert_eq!(ckpt["meta"]["loss"], "radial");
    assert_eq!(
        ckpt["layer_dims"],
        serde_json::json!([2, 110, 110, 110, 110, 110, 110, 110, 1])
    );
    let trace = rows(&dir.join("loss_trace.csv"));
    assert_eq!(trace.len(), 15);
    assert!(trace.iter().all(|r| r[1].parse::<f64>().unwrap().is_finite()));

    ok(&["evaluate", "--example", "1", "--alpha", "1.5", "--out", &dir_arg(dir)]);
    let text = read(&dir.join("metrics.csv"));
    assert_eq!(
        text.lines().nth(1).unwrap(),
        "example,d,alpha,M,P,L,n_iter,gamma,mse,mre,n_excluded,elapsed_seconds"
    );
    let m = &rows(&dir.join("metrics.csv"))[0];
    assert_eq!(&m[..8], ["1", "2", "1.5", "10", "40", "8", "15", "0.005"]);
    assert!(m[8].parse::<f64>().unwrap().is_finite() && m[9].parse::<f64>().unwrap().is_finite());

    let profile = rows(&dir.join("profile.csv"));
    assert_eq!(profile.len(), 5000);
    assert_eq!(profile[0][0].parse::<f64>().unwrap(), 0.0);
    let end = profile[4999][0].parse::<f64>().unwrap();
    assert!((end - (0.5f64.sqrt() + 0.1)).abs() < 1e-15);
    assert_eq!(rows(&dir.join("surface.csv")).len(), 101 * 101);
}

#[test]
fn evaluate_refuses_mismatched_checkpoints() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    train_small(dir, &["--example", "4"]);
    let d = dir_arg(dir);

    let out = fraclap(&["evaluate", "--example", "4", "--dim", "3", "--out", &d]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("dimension"));

    let out = fraclap(&["evaluate", "--example", "1", "--out", &d]);
    assert_eq!(out.status.code(), Some(1));

    // any edit to the checkpoint breaks the hash recorded by the training run
    let path = dir.join("checkpoint.json");
    let text = read(&path).replacen("\"seed\": 0", "\"seed\": 1", 1);
    fs::write(&path, text).unwrap();
    let out = fraclap(&["evaluate", "--example", "4", "--out", &d]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("manifest"));
}

#[test]
fn exact_stub_checkpoint_scores_zero() {
    // relu(x_1 + x_2) - relu(-x_1 - x_2) = x_1 + x_2, the solution of example 4
    let tmp = tempfile::tempdir().unwrap();
    let stub = serde_json::json!({
        "layer_dims": [2, 2, 1],
        "weights": [[1.0, 1.0, -1.0, -1.0], [1.0, -1.0]],
        "biases": [[0.0, 0.0], [0.0]],
        "meta": {"d": 2, "alpha": 0.5, "example": 4, "seed": 0, "n_iter": 0, "loss": "mse"}
    });
    let path = tmp.path().join("stub.json");
    fs::write(&path, stub.to_string()).unwrap();
    let d = dir_arg(tmp.path());
    ok(&[
        "evaluate",
        "--example",
        "4",
        "--alpha",
        "0.5",
        "--checkpoint",
        path.to_str().unwrap(),
        "--out",
        &d,
    ]);
    let m = &rows(&tmp.path().join("metrics.csv"))[0];
    assert_eq!(m[8].parse::<f64>().unwrap(), 0.0);
    assert_eq!(m[9].parse::<f64>().unwrap(), 0.0);
}

#[test]
fn train_refuses_dataset_of_another_problem() {
    let tmp = tempfile::tempdir().unwrap();
    let d = dir_arg(tmp.path());
    ok(&[
        "dataset",
        "--example",
        "2",
        "--points",
        "10",
        "--paths",
        "10",
        "--out",
        &d,
    ]);
    let out = fraclap(&["train", "--example", "3", "--iters", "2", "--batch", "4", "--out", &d]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("example 2"));
}

#[test]
fn malformed_dataset_reports_line() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("bad.csv");
    fs::write(&path, "x_1,x_2,u_hat\n0.1,0.2,0.3\n0.4,zz,0.1\n").unwrap();
    let out = fraclap(&[
        "train",
        "--batch",
        "1",
        "--dataset",
        path.to_str().unwrap(),
        "--out",
        &dir_arg(tmp.path()),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));
}

#[test]
fn sweep_layout_and_replay() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        ok(&[
            "sweep",
            "--m-list",
            "10,20",
            "--p-list",
            "10,30",
            "--alpha-list",
            "0.5,1.5",
            "--iters",
            "5",
            "--eval-points",
            "200",
            "--out",
            &dir_arg(dir),
        ]);
    }
    let text = read(&a.join("timing.csv"));
    assert_eq!(text.lines().nth(1).unwrap(), "alpha,M,P_10,P_30");
    let timing = rows(&a.join("timing.csv"));
    assert_eq!(timing.len(), 4);
    assert_eq!(&timing[0][..2], ["0.5", "10"]);
    assert_eq!(&timing[3][..2], ["1.5", "20"]);
    let errors = rows(&a.join("errors.csv"));
    assert_eq!(errors.len(), 8);
    assert!(errors.iter().all(|r| r[6] == "ok"));
    assert_eq!(
        fs::read(a.join("errors.csv")).unwrap(),
        fs::read(b.join("errors.csv")).unwrap()
    );
}
