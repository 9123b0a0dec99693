use std::path::Path;
use std::process::{Command, Output};

use deim_core::simharness::{load_coco, save_coco, synth_dataset, SynthConfig};

fn deim(args: &[&str], env_out: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_deim"));
    cmd.args(args).env_remove("DEIM_OUT_DIR");
    if let Some(d) = env_out {
        cmd.env("DEIM_OUT_DIR", d);
    }
    cmd.output().unwrap()
}

fn stderr_json(o: &Output) -> serde_json::Value {
    serde_json::from_slice(&o.stderr).unwrap()
}

fn files(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    v.sort();
    v
}

#[test]
fn landscape_header_lists_the_p_grid() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("l");
    let o = deim(&["--out", out.to_str().unwrap(), "landscape", "--loss", "vfl"], None);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(out.join("landscape_vfl.csv")).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# spec: {"));
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(header[0], "q");
    assert_eq!(header[1], "p=0.01");
    assert_eq!(header.len(), 100);
    assert_eq!(*header.last().unwrap(), "p=0.99");
    // 21 q rows
    assert_eq!(lines.count(), 21);
}

#[test]
fn toy_train_writes_one_trace_per_arm_and_seed() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t");
    let o = deim(
        &[
            "--seed",
            "4",
            "--out",
            out.to_str().unwrap(),
            "toy-train",
            "--seeds",
            "2",
            "--epochs",
            "10",
        ],
        None,
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(
        files(&out),
        [
            "manifest.json",
            "summary.json",
            "trace_baseline_seed0.csv",
            "trace_baseline_seed1.csv",
            "trace_deim_seed0.csv",
            "trace_deim_seed1.csv",
        ]
    );
    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["subcommand"], "toy-train");
    assert_eq!(manifest["seed"], 4);
    assert_eq!(manifest["files"].as_array().unwrap().len(), 5);
    let stdout: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(stdout.is_object());
}

#[test]
fn densified_output_reloads_with_more_targets() {
    let dir = tempfile::tempdir().unwrap();
    let (d, _) = synth_dataset(
        &SynthConfig {
            images: 40,
            ..SynthConfig::default()
        },
        2,
    )
    .unwrap();
    let coco = dir.path().join("in.json");
    save_coco(&d, &coco).unwrap();
    let out = dir.path().join("d");
    let o = deim(
        &[
            "--seed",
            "9",
            "--out",
            out.to_str().unwrap(),
            "densify",
            "--coco",
            coco.to_str().unwrap(),
            "--mosaic-prob",
            "0.5",
            "--mixup-prob",
            "0.5",
        ],
        None,
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (dense, _) = load_coco(&out.join("densified.json")).unwrap();
    let mean = |x: &deim_core::simharness::Dataset| x.num_targets() as f64 / x.images.len() as f64;
    assert_eq!(dense.images.len(), d.images.len());
    assert!(mean(&dense) > mean(&d), "{} vs {}", mean(&dense), mean(&d));
}

#[test]
fn out_dir_defaults_to_env_subdirectory() {
    let dir = tempfile::tempdir().unwrap();
    let o = deim(&["curves"], Some(dir.path()));
    assert!(o.status.success());
    assert!(dir.path().join("curves").join("manifest.json").exists());
}

#[test]
fn config_values_override_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"seed": 77, "synth": {"images": 3}}"#).unwrap();
    let out = dir.path().join("m");
    let o = deim(
        &[
            "--seed",
            "1",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "match-stats",
            "--num-images",
            "50",
        ],
        None,
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 77);
    let rows = std::fs::read_to_string(out.join("match_counts.csv"))
        .unwrap()
        .lines()
        .count();
    assert_eq!(rows, 2 + 3);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let o = deim(&["bogus"], Some(dir.path()));
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(stderr_json(&o)["error"], "usage");

    let o = deim(&["match-stats"], Some(dir.path()));
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr_json(&o)["message"].as_str().unwrap().contains("--seed"));

    let missing = dir.path().join("nope.json");
    let o = deim(
        &["--seed", "1", "densify", "--coco", missing.to_str().unwrap()],
        Some(dir.path()),
    );
    assert_eq!(o.status.code(), Some(2));

    let bad = dir.path().join("bad.json");
    std::fs::write(
        &bad,
        r#"{"images": [], "annotations": [], "categories": [{"name": "a"}]}"#,
    )
    .unwrap();
    let o = deim(
        &["--seed", "1", "densify", "--coco", bad.to_str().unwrap()],
        Some(dir.path()),
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr_json(&o)["message"].as_str().unwrap().contains("categories[0]"));

    let o = deim(&["--seed", "1", "toy-train", "--epochs", "4"], Some(dir.path()));
    assert_eq!(o.status.code(), Some(2));
}
