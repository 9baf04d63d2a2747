use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn dfe(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dfe-track"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = dfe(args);
    assert!(
        out.status.success(),
        "{args:?} failed with {:?}:\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn code(args: &[&str]) -> i32 {
    dfe(args).status.code().expect("exit code")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn run_json(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("run.json")).unwrap()).unwrap()
}

fn synth(root: &Path, preset: &str, size: &str, frames: &str) -> std::path::PathBuf {
    let dir = root.join(preset);
    ok(&["--seed", "5", "synth", "--preset", preset, "--width", size, "--height", size, "--frames", frames, "--out-dir", p(&dir)]);
    dir
}

#[test]
fn synth_writes_frames_labels_and_manifest() {
    let tmp = TempDir::new().unwrap();
    let dir = synth(tmp.path(), "bike", "72", "6");
    let frames = fs::read_dir(&dir).unwrap().filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "png")).count();
    assert_eq!(frames, 6);
    let labels = fs::read_to_string(dir.join("labels.csv")).unwrap();
    assert_eq!(labels.lines().next().unwrap(), "frame,x,y");
    assert_eq!(labels.lines().count(), 7);
    assert!(dir.join("spec.json").exists());
    let run = run_json(&dir);
    assert_eq!(run["seed"], 5);
    assert_eq!(run["seed_source"], "flag");
    assert_eq!(run["tool"], "dfe-track");

    // The written spec renders the same sequence again.
    let again = tmp.path().join("again");
    ok(&["synth", p(&dir.join("spec.json")), "--out-dir", p(&again)]);
    assert_eq!(fs::read(dir.join("labels.csv")).unwrap(), fs::read(again.join("labels.csv")).unwrap());
    assert_eq!(run_json(&again)["seed_source"], "entropy");
}

#[test]
fn track_reports_are_reproducible() {
    let tmp = TempDir::new().unwrap();
    let dir = synth(tmp.path(), "static", "64", "5");
    let labels = dir.join("labels.csv");
    let mut outputs = Vec::new();
    for run in ["a", "b"] {
        let out = tmp.path().join(run);
        ok(&[
            "--seed", "3", "track", p(&dir), "--labels", p(&labels), "--matcher", "raw", "--scheme", "previous",
            "--condition", "static-face-mole", "--out-dir", p(&out),
        ]);
        for f in ["predictions.csv", "report.csv", "report.json", "sorted_errors.svg", "cumulative.svg", "pp.svg", "run.json"] {
            assert!(out.join(f).exists(), "missing {f}");
        }
        outputs.push((fs::read(out.join("predictions.csv")).unwrap(), fs::read(out.join("report.csv")).unwrap()));
    }
    assert_eq!(outputs[0], outputs[1]);

    let report = fs::read_to_string(tmp.path().join("a/report.csv")).unwrap();
    assert_eq!(report.lines().next().unwrap(), "frame,pred_x,pred_y,err_px,e_std,cumulative,ci");
    assert_eq!(report.lines().count(), 5);
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("a/report.json")).unwrap()).unwrap();
    assert!(json["mean_error"].as_f64().unwrap() < 1.0);

    let lk = tmp.path().join("lk");
    ok(&["track", p(&dir), "--labels", p(&labels), "--matcher", "lk", "--out-dir", p(&lk)]);
    let preds = fs::read_to_string(lk.join("predictions.csv")).unwrap();
    assert_eq!(preds.lines().next().unwrap(), "frame,pred_x,pred_y,status,nn_ratio");
}

#[test]
fn match_emits_landscape() {
    let tmp = TempDir::new().unwrap();
    let dir = synth(tmp.path(), "bike", "72", "2");
    let out = tmp.path().join("m");
    ok(&[
        "match", p(&dir.join("frame_0000.png")), "36", "36", p(&dir.join("frame_0001.png")), "--matcher", "raw",
        "--emit-landscape", "--out-dir", p(&out),
    ]);
    let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("match.json")).unwrap()).unwrap();
    assert!(m["nn_ratio"].as_f64().unwrap() <= 1.0);
    let csv = fs::read_to_string(out.join("landscape.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 42 * 42);
    assert!(fs::read_to_string(out.join("landscape.svg")).unwrap().starts_with("<svg"));
}

#[test]
fn ingest_train_and_match_with_a_model() {
    let tmp = TempDir::new().unwrap();
    let frames = synth(tmp.path(), "static", "96", "3");
    let manifest = tmp.path().join("manifest.csv");
    ok(&["--seed", "1", "ingest", p(&frames), p(&manifest), "--stride", "8", "--heldout", "0.2"]);
    let rows = fs::read_to_string(&manifest).unwrap().lines().count() - 1;
    assert_eq!(rows, 3 * 9 * 9);

    let model = tmp.path().join("tiny.dfecae");
    let config = tmp.path().join("config.json");
    fs::write(&config, r#"{"input_size":31,"channels":3,"encoder":[{"filters":4,"kernel":15},{"filters":8,"kernel":17}],"seed":2}"#).unwrap();
    ok(&["--seed", "1", "train", p(&manifest), p(&model), "--config", p(&config), "--epochs", "1", "--batch", "16"]);
    assert!(model.exists());
    let run = run_json(tmp.path());
    assert!(run["summary"].is_object());

    let out = tmp.path().join("m");
    ok(&[
        "match", p(&frames.join("frame_0000.png")), "48", "48", p(&frames.join("frame_0001.png")), "--model",
        p(&model), "--out-dir", p(&out),
    ]);
    assert!(out.join("match.json").exists());
}

#[test]
fn convert_calibrate_and_report() {
    let tmp = TempDir::new().unwrap();
    let frames = synth(tmp.path(), "pd", "40", "2");
    let gray = tmp.path().join("gray");
    ok(&["convert", p(&frames), p(&gray), "--to", "gray"]);
    assert!(gray.join("frame_0001.png").exists());

    let relabels = tmp.path().join("relabels.csv");
    let mut csv = String::from("image_id,attempt,x,y\n");
    for i in 0..4 {
        for (a, (dx, dy)) in [(0.5, -1.0), (-0.5, 1.0), (0.0, 0.0)].iter().enumerate() {
            csv.push_str(&format!("{i},{a},{},{}\n", 10.0 * i as f64 + dx, 5.0 + dy));
        }
    }
    fs::write(&relabels, csv).unwrap();
    let model = tmp.path().join("model.json");
    ok(&["calibrate", p(&relabels), "--condition", "test", "--out", p(&model)]);
    let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(&model).unwrap()).unwrap();
    // Per image: x residuals (0.5, -0.5, 0), y residuals (-1, 1, 0); 12 labels, 4 means.
    assert!((m["sigma_x"].as_f64().unwrap() - (2.0f64 / 8.0).sqrt()).abs() < 1e-12);
    assert!((m["sigma_y"].as_f64().unwrap() - 1.0).abs() < 1e-12);

    let errors = tmp.path().join("errors.csv");
    fs::write(&errors, "frame,dx,dy\n1,0.5,-0.3\n2,1.0,0.2\n3,420,300\n").unwrap();
    let out = tmp.path().join("r");
    ok(&["report", p(&errors), "--condition", p(&model), "--image-size", "420", "300", "--out-dir", p(&out)]);
    let t: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("thresholds.json")).unwrap()).unwrap();
    assert!(t.is_array() || t.is_object());
    let r: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert!(r["mean_error"].as_f64().unwrap() <= 516.15);
}

#[test]
fn exit_codes() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(code(&["no-such-command"]), 2);
    assert_eq!(code(&["track"]), 2);
    assert_eq!(code(&["calibrate", p(&tmp.path().join("missing.csv"))]), 4);
    let dir = synth(tmp.path(), "static", "48", "2");
    let out = p(tmp.path());
    assert_eq!(code(&["track", p(&dir), "--matcher", "dfe", "--out-dir", out]), 2);
    assert_eq!(code(&["track", p(&dir), "--matcher", "raw", "--condition", "no-such-condition", "--out-dir", out]), 2);
    assert_eq!(code(&["match", p(&dir.join("frame_0000.png")), "2", "2", p(&dir.join("frame_0001.png")), "--matcher", "raw"]), 2);
    assert_eq!(code(&["--version"]), 0);
}
