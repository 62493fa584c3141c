mod common;

use std::path::Path;
use std::process::{Command, Output};

use common::{fer_csv, five_layer_weights, write_gray_png};
use fer_core::EmotionLabel;

fn fer(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fer")).args(args).output().unwrap()
}

fn ok_stdout(args: &[&str]) -> String {
    let out = fer(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Class directories with `per_class` distinct images each.
fn class_dirs(root: &Path, per_class: u32) {
    for (c, l) in EmotionLabel::ALL.iter().enumerate() {
        for i in 0..per_class {
            let band = 4 + 6 * c as u32;
            write_gray_png(&root.join(l.name()).join(format!("{i}.png")), 48, 48, |x, y| {
                if (band..band + 4).contains(&y) {
                    230
                } else {
                    ((x * 7 + y * 13 + i * 29) % 60) as u8
                }
            });
        }
    }
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(fer(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(fer(&["eval", "--weights"]).status.code(), Some(1));
    assert_eq!(fer(&["--help"]).status.code(), Some(0));
}

#[test]
fn data_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = fer(&["predict", "--weights", p(&dir.path().join("missing.ferw")), "x.png"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.ferw"));
    let junk = dir.path().join("junk.ferw");
    std::fs::write(&junk, b"not weights").unwrap();
    let img = dir.path().join("a.png");
    write_gray_png(&img, 48, 48, |_, _| 0);
    assert_eq!(fer(&["predict", "--weights", p(&junk), p(&img)]).status.code(), Some(2));
}

#[test]
fn diverging_training_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    class_dirs(&dir.path().join("data"), 2);
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "dataset = data\nlr0 = 1e30\nbatch_size = 4\nmax_epochs = 3\naugment = false\ntrain_fraction = 0.5\n").unwrap();
    let out = fer(&["train", "--config", p(&cfg), "--out", p(&dir.path().join("m.ferw"))]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("non-finite"));
}

#[test]
fn predict_prints_a_distribution() {
    let dir = tempfile::tempdir().unwrap();
    let w = dir.path().join("m.ferw");
    five_layer_weights(&w, 1);
    let img = dir.path().join("face.png");
    write_gray_png(&img, 48, 48, |x, y| (x * 5 + y) as u8);
    for extra in [&[][..], &["--tta"][..]] {
        let mut args = vec!["predict", "--weights", p(&w), p(&img)];
        args.extend_from_slice(extra);
        let v: serde_json::Value = serde_json::from_str(&ok_stdout(&args)).unwrap();
        let probs: Vec<f64> = v["probabilities"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
        assert_eq!(probs.len(), 7);
        assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-5);
        assert!(v["label"].is_string());
    }
    // a different size is resized rather than rejected
    let big = dir.path().join("big.png");
    write_gray_png(&big, 64, 64, |_, _| 7);
    ok_stdout(&["predict", "--weights", p(&w), p(&big)]);
}

#[test]
fn eval_is_reproducible_and_writes_error_report() {
    let dir = tempfile::tempdir().unwrap();
    let w = dir.path().join("m.ferw");
    five_layer_weights(&w, 2);
    let csv = dir.path().join("fer.csv");
    let rows: Vec<(u8, &str, u8)> = (0..14).map(|i| ((i % 7) as u8, "PrivateTest", i as u8 * 9)).collect();
    std::fs::write(&csv, fer_csv(&rows)).unwrap();
    let errors = dir.path().join("errors.jsonl");
    let args = ["eval", "--weights", p(&w), "--dataset", p(&csv), "--errors", p(&errors)];
    let a = ok_stdout(&args);
    let b = ok_stdout(&args);
    assert_eq!(a, b);
    let v: serde_json::Value = serde_json::from_str(&a).unwrap();
    assert_eq!(v["samples"], 14);
    let acc = v["accuracy"].as_f64().unwrap();
    let wrong = std::fs::read_to_string(&errors).unwrap().lines().count();
    assert_eq!(wrong, 14 - (acc * 14.0).round() as usize);
    let table = ok_stdout(&["eval", "--weights", p(&w), "--dataset", p(&csv), "--format", "table"]);
    assert!(table.contains("disgust"));
}

#[test]
fn dataset_stats_counts_splits() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("fer.csv");
    std::fs::write(&csv, fer_csv(&[(3, "Training", 0), (3, "Training", 1), (5, "PublicTest", 2), (0, "PrivateTest", 3)])).unwrap();
    let v: serde_json::Value = serde_json::from_str(&ok_stdout(&["dataset-stats", "--dataset", p(&csv), "--format", "json"])).unwrap();
    let rows = v.as_array().unwrap();
    assert_eq!(rows.len(), 4);
    assert_eq!(rows[0]["counts"][3], 2);
    assert_eq!(rows[1]["counts"][5], 1);
    assert_eq!(rows[3]["total"], 4);

    class_dirs(&dir.path().join("dirs"), 1);
    let table = ok_stdout(&["dataset-stats", "--dataset", p(&dir.path().join("dirs"))]);
    assert!(table.lines().nth(1).unwrap().trim_end().ends_with(" 7"));
}

#[test]
fn explain_writes_overlay_png() {
    let dir = tempfile::tempdir().unwrap();
    let w = dir.path().join("m.ferw");
    five_layer_weights(&w, 3);
    let img = dir.path().join("face.png");
    write_gray_png(&img, 48, 48, |x, _| (x * 5) as u8);
    for method in ["occlusion", "saliency"] {
        let out = dir.path().join(format!("{method}.png"));
        let json = dir.path().join(format!("{method}.json"));
        ok_stdout(&["explain", "--weights", p(&w), p(&img), "--method", method, "--out", p(&out), "--class", "happy", "--json", p(&json)]);
        let overlay = image::open(&out).unwrap();
        assert_eq!((overlay.width(), overlay.height()), (48, 48));
        let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
        assert_eq!(v["values"].as_array().unwrap().len(), 48 * 48);
        assert_eq!(v["target_class"], "happy");
    }
    let bad = fer(&["explain", "--weights", p(&w), p(&img), "--method", "occlusion", "--out", p(&dir.path().join("x.png")), "--patch", "0"]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn ensemble_of_one_matches_eval() {
    let dir = tempfile::tempdir().unwrap();
    let w = dir.path().join("m.ferw");
    five_layer_weights(&w, 4);
    class_dirs(&dir.path().join("data"), 1);
    let spec = dir.path().join("ensemble.json");
    std::fs::write(&spec, r#"[{"weights_path": "m.ferw", "tta": false}, {"weights_path": "m.ferw", "tta": false}]"#).unwrap();
    let data = dir.path().join("data");
    let single = ok_stdout(&["eval", "--weights", p(&w), "--dataset", p(&data)]);
    let pair = ok_stdout(&["ensemble-eval", "--spec", p(&spec), "--dataset", p(&data)]);
    assert_eq!(single, pair);

    std::fs::write(&spec, r#"[{"weights_path": "absent.ferw", "tta": true}]"#).unwrap();
    let out = fer(&["ensemble-eval", "--spec", p(&spec), "--dataset", p(&data)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("absent.ferw"));
}

#[test]
fn train_writes_weights_and_history() {
    let dir = tempfile::tempdir().unwrap();
    class_dirs(&dir.path().join("data"), 4);
    let cfg = dir.path().join("run.cfg");
    std::fs::write(
        &cfg,
        "# tiny smoke run\ndataset = data\nbatch_size = 7\nmax_epochs = 2\ntrain_fraction = 0.75\nweights_out = out/m.ferw\nseed = 5\n",
    )
    .unwrap();
    std::fs::create_dir(dir.path().join("out")).unwrap();
    let out = fer(&["train", "--config", p(&cfg)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let w = dir.path().join("out/m.ferw");
    let (model, meta) = fer::weights::load(&w).unwrap();
    assert_eq!(model.param_count(), 2_438_311);
    assert!(meta.val_accuracy.is_some());
    let history = fer::report::read_history(&fer::cli::history_path(&w)).unwrap();
    assert_eq!(history.len(), 2);
    assert_eq!(history[0].epoch, 0);
}
