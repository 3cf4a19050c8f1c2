//! Integration tests driving the compiled binary.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_bboxlab"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).unwrap()
}

fn fixture(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
        .display()
        .to_string()
}

#[test]
fn eval_human_output() {
    let out = run(&[
        "eval", "--metric", "shape-iou", "--pred", "0.5,0,4,2", "--gt", "0,0,4,2", "--scale", "1",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.starts_with("# bboxlab "), "{text}");
    assert!(text.contains("loss: 0.229095"), "{text}");
    assert!(text.contains("config:"), "{text}");
}

#[test]
fn config_file_merges_under_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(
        &cfg,
        r#"{"metric": "iou", "pred": "1,0,2,2", "gt": "0,0,2,2", "format": "json"}"#,
    )
    .unwrap();
    let cfg = cfg.to_str().unwrap();

    let from_file = run(&["eval", "--config", cfg]);
    assert!(from_file.status.success(), "{}", stderr(&from_file));
    let doc: serde_json::Value = serde_json::from_str(&stdout(&from_file)).unwrap();
    let v = doc["result"]["value"].as_f64().unwrap();
    assert!((v - 1.0 / 3.0).abs() < 1e-12);

    // flag overrides the file's metric; the file still supplies the boxes
    let overridden = run(&["eval", "--config", cfg, "--metric", "diou"]);
    assert!(overridden.status.success(), "{}", stderr(&overridden));
    let doc: serde_json::Value = serde_json::from_str(&stdout(&overridden)).unwrap();
    assert_eq!(doc["config"]["metric"], "diou");
    let v = doc["result"]["value"].as_f64().unwrap();
    assert!((v - (1.0 / 3.0 - 1.0 / 13.0)).abs() < 1e-12);
}

#[test]
fn artifacts_are_deterministic() {
    let args = [
        "sweep", "--gt", "0,0,4,2", "--axis", "both", "--metric", "iou", "--max-dev", "2",
        "--steps", "40", "--format", "svg",
    ];
    let a = run(&args);
    let b = run(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    assert!(stdout(&a).contains("<svg"));

    let args = [
        "simulate", "--anchor", "1,1,2,2", "--gt", "0,0,2,2", "--metric", "giou", "--format",
        "csv",
    ];
    let a = run(&args);
    let b = run(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn out_flag_writes_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sweep.csv");
    let out = run(&[
        "sweep", "--gt", "0,0,4,2", "--metric", "iou", "--max-dev", "1", "--steps", "4",
        "--format", "csv", "--out", path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).is_empty());
    let text = std::fs::read_to_string(&path).unwrap();
    // stripping the reproducibility header leaves plain CSV
    let body: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(body[0], "deviation,value_x,value_y");
    assert_eq!(body.len(), 6);
}

#[test]
fn stats_reports_mean_size() {
    let out = run(&["stats", "--annotations", &fixture("mini-coco.json")]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("mean_size_s: 3.16228"), "{text}");
    assert!(text.contains("n_boxes: 3"), "{text}");

    let out = run(&[
        "stats", "--annotations", &fixture("yolo"), "--ann-format", "yolo-txt", "--format", "json",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let doc: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    let s = doc["result"]["mean_size_s"].as_f64().unwrap();
    assert!((s - 10.0f64.sqrt()).abs() < 1e-9);
}

#[test]
fn missing_required_param_is_exit_2() {
    let out = run(&["eval", "--metric", "dotd", "--pred", "0,0,1,1", "--gt", "0,0,1,1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("--mean-size"), "{}", stderr(&out));
    assert!(out.stdout.is_empty());

    let out = run(&["eval", "--metric", "iou", "--pred", "0,0,-1,1", "--gt", "0,0,1,1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_flag_is_exit_2_and_help_is_exit_0() {
    let out = run(&["eval", "--frobnicate"]);
    assert_eq!(out.status.code(), Some(2));

    for sub in ["eval", "grad-check", "oracle", "sweep", "simulate", "compare", "stats"] {
        let out = run(&[sub, "--help"]);
        assert_eq!(out.status.code(), Some(0), "{sub} --help");
        assert!(stdout(&out).contains("Usage:"), "{sub}");
    }
    let out = run(&["--version"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).starts_with("bboxlab "));
}

#[test]
fn seed_env_var_feeds_default() {
    let out = bin()
        .env("BBOXLAB_SEED", "99")
        .args(["oracle", "--a", "0,0,2,2", "--b", "1,0,2,2", "--n", "1000"])
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(stdout(&out).contains("# seed: 99"), "{}", stdout(&out));

    // explicit flag wins over the env var
    let out = bin()
        .env("BBOXLAB_SEED", "99")
        .args(["oracle", "--a", "0,0,2,2", "--b", "1,0,2,2", "--n", "1000", "--seed", "3"])
        .output()
        .unwrap();
    assert!(stdout(&out).contains("# seed: 3"), "{}", stdout(&out));
}

#[test]
fn grad_check_reports_agreement() {
    let out = run(&[
        "grad-check", "--metric", "ciou", "--pred", "0.7,0.2,2,1.5", "--gt", "0,0,3,1",
        "--format", "csv",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    for line in text.lines().filter(|l| !l.starts_with('#')).skip(1) {
        let rel: f64 = line.rsplit(',').next().unwrap().parse().unwrap();
        assert!(rel < 1e-5, "{line}");
    }
}

#[test]
fn compare_emits_one_row_per_metric() {
    let out = run(&[
        "compare", "--metrics", "giou,diou,shape-iou", "--n-scenarios", "5", "--max-steps",
        "200", "--format", "csv", "--seed", "1",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    let body: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(body[0], "metric,mean_final_iou,mean_steps,diverged");
    assert_eq!(body.len(), 4);
    assert!(body[1].starts_with("giou,"));
}
