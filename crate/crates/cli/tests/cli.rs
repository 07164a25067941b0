use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;
use std::process::{Command, Output};

use prox24::tensor::{read_mask, read_weights, write_mask};
use prox24::MaskTensor;

fn prox24_cmd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_prox24"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("config.json");
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

const SMALL: &str =
    r#"{"input_dim": 16, "output_dim": 8, "n_calib": 80, "n_test": 200, "epochs": 20}"#;

#[test]
fn train_then_eval() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("run");
    let o = prox24_cmd(&[
        "train",
        "--config",
        &cfg,
        "--out",
        out.to_str().unwrap(),
        "--seed",
        "5",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("# seed=5\n"));

    for f in [
        "config.json",
        "metrics.csv",
        "mask_layer0.nmmk",
        "weights_layer0.nmpx",
        "w0_layer0.nmpx",
        "test.csv",
        "checkpoint.nmck",
        "summary.json",
    ] {
        assert!(out.join(f).exists(), "{f}");
    }
    let summary = json(&out.join("summary.json"));
    assert_eq!(summary["seed"], 5);
    assert_eq!(summary["removed_fraction"], 0.5);
    assert_eq!(summary["sparsity_ratio"], 1.0);
    for k in ["dense", "learned", "magnitude", "wanda"] {
        assert!(summary["test_mse"][k].is_f64(), "{k}");
    }
    assert!(fs::read_to_string(out.join("metrics.csv"))
        .unwrap()
        .starts_with("# seed=5\nstep,loss,"));

    let mask = read_mask(&mut BufReader::new(
        File::open(out.join("mask_layer0.nmmk")).unwrap(),
    ))
    .unwrap();
    mask.validate_24().unwrap();
    let snapped = read_weights(&mut BufReader::new(
        File::open(out.join("weights_layer0.nmpx")).unwrap(),
    ))
    .unwrap();
    let w0 = read_weights(&mut BufReader::new(
        File::open(out.join("w0_layer0.nmpx")).unwrap(),
    ))
    .unwrap();
    for i in 0..w0.len() {
        let expected = if mask.bits()[i] { w0.data()[i] } else { 0.0 };
        assert_eq!(snapped.data()[i].to_bits(), expected.to_bits());
    }

    let o = prox24_cmd(&[
        "eval",
        "--weights",
        out.join("w0_layer0.nmpx").to_str().unwrap(),
        "--mask",
        out.join("mask_layer0.nmmk").to_str().unwrap(),
        "--testset",
        out.join("test.csv").to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(report["removed_fraction"], 0.5);
    assert_eq!(report["sparsity_ratio"], 1.0);
    // teacher pruned by any 2:4 mask loses accuracy
    assert!(report["test_mse"].as_f64().unwrap() > 0.0);
    assert_eq!(report["test_mse"], summary["test_mse"]["learned"]);

    // a dense mask is refused
    let dense = dir.path().join("dense.nmmk");
    let mut f = BufWriter::new(File::create(&dense).unwrap());
    write_mask(
        &mut f,
        &MaskTensor::filled(mask.rows(), mask.cols(), true).unwrap(),
    )
    .unwrap();
    f.flush().unwrap();
    drop(f);
    let o = prox24_cmd(&[
        "eval",
        "--weights",
        out.join("w0_layer0.nmpx").to_str().unwrap(),
        "--mask",
        dense.to_str().unwrap(),
        "--testset",
        out.join("test.csv").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("2:4"), "{}", stderr(&o));
}

#[test]
fn same_seed_same_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let o = prox24_cmd(&["train", "--config", &cfg, "--out", out.to_str().unwrap()]);
        assert!(o.status.success());
    }
    for f in [
        "metrics.csv",
        "mask_layer0.nmmk",
        "weights_layer0.nmpx",
        "checkpoint.nmck",
    ] {
        assert_eq!(
            fs::read(a.join(f)).unwrap(),
            fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn mlp_train_writes_two_layers() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"model": "mlp2", "input_dim": 16, "hidden_dim": 8, "output_dim": 4, "n_calib": 40, "n_test": 50, "epochs": 5, "arm": "hard_both"}"#,
    );
    let out = dir.path().join("run");
    let o = prox24_cmd(&["train", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = prox24_cmd(&[
        "eval",
        "--weights",
        out.join("w0_layer0.nmpx").to_str().unwrap(),
        "--weights",
        out.join("w0_layer1.nmpx").to_str().unwrap(),
        "--mask",
        out.join("mask_layer0.nmmk").to_str().unwrap(),
        "--mask",
        out.join("mask_layer1.nmmk").to_str().unwrap(),
        "--testset",
        out.join("test.csv").to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(report["layers"], 2);
    assert_eq!(report["removed_fraction"], 0.5);
}

#[test]
fn config_errors_exit_with_validation_code() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let out = out.to_str().unwrap();

    let cfg = write_config(dir.path(), r#"{"lambda_one": 0.1}"#);
    let o = prox24_cmd(&["train", "--config", &cfg, "--out", out]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("lambda_one"), "{}", stderr(&o));

    let cfg = write_config(dir.path(), "{\n  \"lambda1\": 0.1,\n  \"epochs\": ten\n}");
    let o = prox24_cmd(&["train", "--config", &cfg, "--out", out]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));

    let cfg = write_config(dir.path(), r#"{"batch_size": 0}"#);
    let o = prox24_cmd(&["train", "--config", &cfg, "--out", out]);
    assert_eq!(o.status.code(), Some(2));

    let o = prox24_cmd(&["train", "--config", "/nonexistent/cfg.json", "--out", out]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn divergence_exits_with_code_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"input_dim": 16, "output_dim": 8, "n_calib": 80, "n_test": 20, "epochs": 20, "peak_lr": 1e8, "snapshot_every": 1}"#,
    );
    let out = dir.path().join("run");
    let o = prox24_cmd(&["train", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("diverged"));
    assert!(out.join("metrics.csv").exists());
    assert!(!out.join("summary.json").exists());
}

#[test]
fn reg_path_csv() {
    let dir = tempfile::tempdir().unwrap();
    let o = prox24_cmd(&[
        "reg-path",
        "--y",
        "1.4,1.1,1.0,0.7",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(dir.path().join("reg_path.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("lambda,w1,w2,w3,w4,kind,kkt_2sparse"));
    let mut prev_nnz = 4;
    let mut rows = 0;
    for line in lines {
        let f: Vec<&str> = line.split(',').collect();
        let lambda: f64 = f[0].parse().unwrap();
        let w: Vec<f64> = f[1..5].iter().map(|v| v.parse().unwrap()).collect();
        let nnz = w.iter().filter(|v| **v != 0.0).count();
        assert!(nnz <= prev_nnz);
        prev_nnz = nnz;
        if lambda >= 0.66 {
            assert_eq!(w, [1.4, 1.1, 0.0, 0.0]);
        }
        assert!((f[6].parse::<f64>().unwrap() - 1.0 / 1.54).abs() < 1e-12);
        rows += 1;
    }
    assert_eq!(rows, 200);

    let o = prox24_cmd(&["reg-path", "--y=-1,0.2,-3,0.5", "--lambdas", "3"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o)
        .lines()
        .last()
        .unwrap()
        .starts_with("1e1,-1e0,0e0,-3e0,0e0,two_sparse"));

    let o = prox24_cmd(&["reg-path", "--y", "1,2,3"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn solver_bench_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let o = prox24_cmd(&[
        "solver-bench",
        "--instances",
        "2",
        "--lambdas",
        "5",
        "--seed",
        "7",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("# seed=7\n"));
    let csv = fs::read_to_string(dir.path().join("bench.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("# seed=7"));
    assert_eq!(
        lines.next(),
        Some("solver,instance,lambda,objective,gap,micros")
    );
    assert_eq!(lines.count(), 3 * 2 * 5);

    let report = json(&dir.path().join("bench_report.json"));
    assert_eq!(report["seed"], 7);
    assert_eq!(report["instances"], 2);
    let solvers = report["solvers"].as_array().unwrap();
    assert_eq!(solvers.len(), 3);
    for s in solvers {
        assert!(s["max_suboptimality"].as_f64().unwrap() <= 1e-6);
    }

    let o = prox24_cmd(&["solver-bench", "--instances", "0"]);
    assert_eq!(o.status.code(), Some(2));
}
