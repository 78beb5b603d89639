use std::path::Path;
use std::process::{Command, Output};

fn despawn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_despawn"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = despawn(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn detection_pipeline_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let data = d.join("data");
    let manifest = data.join("detection.json");
    let (model, train_csv, test_csv, elm, scores) = (
        d.join("model.json"),
        d.join("train.csv"),
        d.join("test.csv"),
        d.join("elm.json"),
        d.join("scores.csv"),
    );
    ok(&[
        "synth",
        "--out",
        p(&data),
        "--seed",
        "3",
        "--n-normal",
        "24",
        "--n-anomal",
        "6",
        "--window",
        "256",
    ]);
    assert!(manifest.exists() && data.join("classification.json").exists());

    let report = ok(&[
        "train",
        "--manifest",
        p(&manifest),
        "--mode",
        "despawn",
        "--levels",
        "auto",
        "--epochs",
        "2",
        "--batch",
        "8",
        "--lr",
        "1e-3",
        "--seed",
        "1",
        "--out",
        p(&model),
    ]);
    let report: serde_json::Value = serde_json::from_str(&report).unwrap();
    assert_eq!(report["levels"], 8);
    assert_eq!(report["signals"], 24);

    ok(&[
        "features",
        "--model",
        p(&model),
        "--manifest",
        p(&manifest),
        "--split",
        "train",
        "--out",
        p(&train_csv),
    ]);
    ok(&[
        "features",
        "--model",
        p(&model),
        "--manifest",
        p(&manifest),
        "--split",
        "test",
        "--out",
        p(&test_csv),
    ]);
    let header = std::fs::read_to_string(&train_csv).unwrap();
    assert!(header.starts_with("id,res_mean,res_max,l1_mean_1,"));
    assert_eq!(header.lines().count(), 25);

    ok(&[
        "detect-train",
        "--features",
        p(&train_csv),
        "--neurons",
        "10",
        "--seed",
        "2",
        "--out",
        p(&elm),
    ]);
    ok(&[
        "detect-score",
        "--elm",
        p(&elm),
        "--features",
        p(&test_csv),
        "--out",
        p(&scores),
    ]);
    let auc: f64 = ok(&[
        "eval-auc",
        "--scores",
        p(&scores),
        "--manifest",
        p(&manifest),
    ])
    .trim()
    .parse()
    .unwrap();
    assert!((0.0..=1.0).contains(&auc));
}

#[test]
fn reconstruct_reports_residual() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let data = d.join("data");
    ok(&[
        "synth",
        "--out",
        p(&data),
        "--n-normal",
        "8",
        "--n-anomal",
        "2",
        "--window",
        "128",
    ]);
    let model = d.join("db4.json");
    ok(&[
        "train",
        "--manifest",
        p(&data.join("detection.json")),
        "--mode",
        "db4",
        "--epochs",
        "1",
        "--out",
        p(&model),
    ]);
    let out = d.join("recon.wav");
    let report = ok(&[
        "reconstruct",
        "--model",
        p(&model),
        "--input",
        p(&data.join("detection_normal_train_0000.wav")),
        "--out",
        p(&out),
    ]);
    let report: serde_json::Value = serde_json::from_str(&report).unwrap();
    assert_eq!(report["samples"], 128);
    assert!(report["max_abs_residual"].as_f64().unwrap() < 1e-8);
    assert!(out.exists());
}

#[test]
fn classification_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let data = d.join("data");
    ok(&[
        "synth",
        "--out",
        p(&data),
        "--n-normal",
        "2",
        "--n-anomal",
        "1",
        "--window",
        "128",
    ]);
    let manifest = data.join("classification.json");
    let dict = d.join("dict.json");
    let predictions = d.join("predictions.csv");
    ok(&[
        "classify-train",
        "--manifest",
        p(&manifest),
        "--mode",
        "db4",
        "--epochs",
        "1",
        "--out",
        p(&dict),
    ]);
    let summary = ok(&[
        "classify",
        "--dict",
        p(&dict),
        "--manifest",
        p(&manifest),
        "--out",
        p(&predictions),
    ]);
    let summary: serde_json::Value = serde_json::from_str(&summary).unwrap();
    assert_eq!(summary["accuracy"], 0.5);
    let csv = std::fs::read_to_string(&predictions).unwrap();
    assert!(csv.starts_with("id,label,predicted,loss_A,loss_B"));
    assert!(csv
        .lines()
        .skip(1)
        .all(|l| l.split(',').nth(2) == Some("A")));
}

#[test]
fn grad_check_passes_and_fails() {
    let report = ok(&["grad-check", "--mode", "cwn", "--seed", "0"]);
    assert!(report.contains("\"passed\":true"));
    let strict = despawn(&["grad-check", "--mode", "cwn", "--tolerance", "0"]);
    assert!(!strict.status.success());
}

#[test]
fn errors_exit_nonzero_with_message() {
    let out = despawn(&[
        "features",
        "--model",
        "/no/model.json",
        "--manifest",
        "/no/m.json",
        "--out",
        "/tmp/x.csv",
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));

    let out = despawn(&[
        "train",
        "--manifest",
        "m.json",
        "--mode",
        "wavelet",
        "--out",
        "x",
    ]);
    assert!(!out.status.success());
    assert!(!out.stderr.is_empty());
}
