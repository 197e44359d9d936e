//! End-to-end tests driving the compiled `histoml` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use histoml_core::data::{generate_image_tree, ImageTreeOptions, LabelMap};

const CLASSES: [&str; 3] = ["alpha", "beta", "gamma"];

fn histoml(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_histoml"))
        .args(args)
        .current_dir(cwd)
        .env_remove("HISTOML_CACHE_DIR")
        .output()
        .expect("binary should launch")
}

fn assert_exit(output: &Output, code: i32) {
    assert_eq!(
        output.status.code(),
        Some(code),
        "stdout:\n{}\nstderr:\n{}",
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr)
    );
}

fn write_dataset(root: &Path, per_class: usize) {
    let label_map = LabelMap::from_names(CLASSES.to_vec()).unwrap();
    generate_image_tree(
        root,
        &label_map,
        &ImageTreeOptions {
            per_class,
            image_size: 32,
            noise: 12,
            seed: 7,
        },
    )
    .unwrap();
}

fn write_config(dir: &Path, dataset_root: &Path) -> PathBuf {
    let path = dir.join("config.toml");
    let text = format!(
        r#"cache_dir = "{cache}"
output_dir = "{out}"

[dataset]
root = "{root}"
classes = ["alpha", "beta", "gamma"]

[preprocess]
width = 32
height = 32

[[backbones]]
backbone_id = "mock"

[evaluation]
mode = "kfold"
k = 5
seed = 11
"#,
        cache = dir.join("cache").display(),
        out = dir.join("out").display(),
        root = dataset_root.display(),
    );
    fs::write(&path, text).unwrap();
    path
}

#[test]
fn scan_extract_run_report_predict_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().join("data");
    write_dataset(&root, 10);

    let manifest = dir.path().join("manifest.json");
    let output = histoml(
        &[
            "scan",
            "--root",
            root.to_str().unwrap(),
            "--classes",
            "alpha,beta,gamma",
            "--output",
            manifest.to_str().unwrap(),
        ],
        dir.path(),
    );
    assert_exit(&output, 0);
    assert!(manifest.is_file());

    let cache = dir.path().join("cache");
    let extract_args = [
        "extract",
        "--manifest",
        manifest.to_str().unwrap(),
        "--backbone",
        "mock",
        "--cache-dir",
        cache.to_str().unwrap(),
        "--width",
        "32",
        "--height",
        "32",
    ];
    let output = histoml(&extract_args, dir.path());
    assert_exit(&output, 0);
    let stdout = String::from_utf8_lossy(&output.stdout).to_string();
    assert!(stdout.contains("extracted"), "stdout: {stdout}");

    let output = histoml(&extract_args, dir.path());
    assert_exit(&output, 0);
    let stdout = String::from_utf8_lossy(&output.stdout).to_string();
    assert!(stdout.contains("cache hit"), "stdout: {stdout}");

    let config = write_config(dir.path(), &root);
    let output = histoml(&["run", "--config", config.to_str().unwrap()], dir.path());
    assert_exit(&output, 0);
    let out_dir = dir.path().join("out");
    assert!(out_dir.join("result.json").is_file());
    assert!(out_dir.join("summary.json").is_file());
    assert!(out_dir.join("bundle").join("bundle.json").is_file());

    let output = histoml(
        &["report", "--result-dir", out_dir.to_str().unwrap()],
        dir.path(),
    );
    assert_exit(&output, 0);
    let report_dir = out_dir.join("report");
    assert!(report_dir.join("leaderboard.csv").is_file());
    assert!(report_dir.join("report_manifest.json").is_file());

    let image = first_image(&root.join("alpha"));
    let output = histoml(
        &[
            "predict",
            "--bundle",
            out_dir.join("bundle").to_str().unwrap(),
            "--image",
            image.to_str().unwrap(),
        ],
        dir.path(),
    );
    assert_exit(&output, 0);
    let stdout = String::from_utf8_lossy(&output.stdout);
    let line = stdout.trim();
    assert!(!line.contains('\n'), "expected one line: {stdout}");
    let parsed: serde_json::Value = serde_json::from_str(line).unwrap();
    let class_name = parsed["class_name"].as_str().unwrap();
    assert!(CLASSES.contains(&class_name));
    let probabilities = parsed["probabilities"].as_array().unwrap();
    assert_eq!(probabilities.len(), CLASSES.len());
    let total: f64 = probabilities.iter().map(|v| v.as_f64().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-9);
}

fn first_image(class_dir: &Path) -> PathBuf {
    let mut entries: Vec<PathBuf> = fs::read_dir(class_dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    entries.sort();
    entries.into_iter().next().expect("class dir has images")
}

#[test]
fn invalid_config_exits_with_config_code() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.toml");
    let text = format!(
        r#"[dataset]
root = "{root}"
classes = ["alpha", "beta", "gamma"]

[[backbones]]
backbone_id = "mock"

[hpf]
top_k = 0
"#,
        root = dir.path().join("data").display(),
    );
    fs::write(&config, text).unwrap();
    let output = histoml(&["run", "--config", config.to_str().unwrap()], dir.path());
    assert_exit(&output, 2);
}

#[test]
fn missing_dataset_root_exits_with_data_code() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), &dir.path().join("nope"));
    let output = histoml(&["run", "--config", config.to_str().unwrap()], dir.path());
    assert_exit(&output, 3);
}

#[test]
fn corrupt_bundle_exits_with_model_code() {
    let dir = tempfile::tempdir().unwrap();
    let bundle = dir.path().join("bundle");
    fs::create_dir_all(&bundle).unwrap();
    fs::write(bundle.join("bundle.json"), "not json").unwrap();
    let image = dir.path().join("probe.png");
    image::RgbImage::from_pixel(8, 8, image::Rgb([10, 200, 30]))
        .save(&image)
        .unwrap();
    let output = histoml(
        &[
            "predict",
            "--bundle",
            bundle.to_str().unwrap(),
            "--image",
            image.to_str().unwrap(),
        ],
        dir.path(),
    );
    assert_exit(&output, 4);
}

#[test]
fn cache_env_var_overrides_config_cache_dir() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().join("data");
    write_dataset(&root, 5);
    let manifest = dir.path().join("manifest.json");
    let output = histoml(
        &[
            "scan",
            "--root",
            root.to_str().unwrap(),
            "--classes",
            "alpha,beta,gamma",
            "--output",
            manifest.to_str().unwrap(),
        ],
        dir.path(),
    );
    assert_exit(&output, 0);

    let env_cache = dir.path().join("env_cache");
    let output = Command::new(env!("CARGO_BIN_EXE_histoml"))
        .args([
            "extract",
            "--manifest",
            manifest.to_str().unwrap(),
            "--backbone",
            "mock",
            "--width",
            "32",
            "--height",
            "32",
        ])
        .current_dir(dir.path())
        .env("HISTOML_CACHE_DIR", &env_cache)
        .output()
        .expect("binary should launch");
    assert_exit(&output, 0);
    assert!(env_cache.is_dir(), "env cache dir should receive features");
    assert!(!dir.path().join("cache").exists());
}
