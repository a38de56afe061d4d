use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn fuselab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fuselab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = fuselab(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn json(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

const PROFILES: &str = r#"{"models": [
  {"model_id": "alpha", "miss_rate": 0.2, "fp_per_image": 0.5, "loc_sigma": 2.0, "confusion_rate": 0.05},
  {"model_id": "beta", "miss_rate": 0.1, "fp_per_image": 1.0, "loc_sigma": 3.0, "confusion_rate": 0.05,
   "per_image_runtime": 0.5}
]}"#;

/// Synthetic dataset plus two simulated detection files.
fn workspace(dir: &Path) -> (PathBuf, Vec<PathBuf>) {
    let ds = dir.join("ds.json");
    ok(&["synth", "--images", "30", "--seed", "4", "--out", s(&ds)]);
    let prof = dir.join("profiles.json");
    fs::write(&prof, PROFILES).unwrap();
    let dets = dir.join("dets");
    ok(&[
        "simulate",
        "--dataset",
        s(&ds),
        "--profiles",
        s(&prof),
        "--seed",
        "9",
        "--out",
        s(&dets),
    ]);
    (ds, vec![dets.join("alpha.json"), dets.join("beta.json")])
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(fuselab(&["--help"]).status.code(), Some(0));
    assert_eq!(fuselab(&["--version"]).status.code(), Some(0));
    assert_eq!(fuselab(&["fuse", "--help"]).status.code(), Some(0));
}

#[test]
fn bad_arguments_exit_one() {
    assert_eq!(fuselab(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(fuselab(&["fuse"]).status.code(), Some(1));
}

#[test]
fn fractions_not_summing_to_one_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let ds = dir.path().join("ds.json");
    ok(&["synth", "--images", "10", "--out", s(&ds)]);
    let out = fuselab(&[
        "split",
        "--dataset",
        s(&ds),
        "--out",
        s(&dir.path().join("sp")),
        "--train",
        "0.5",
        "--val",
        "0.5",
        "--test",
        "0.1",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("sum to 1"));
}

#[test]
fn missing_input_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = fuselab(&[
        "eval",
        "--gt",
        s(&dir.path().join("absent.json")),
        "--dets",
        s(&dir.path().join("absent_too.json")),
        "--out",
        s(&dir.path().join("r.json")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error: "));
}

#[test]
fn malformed_input_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{ not json").unwrap();
    let out = fuselab(&[
        "fuse",
        "--dets",
        s(&bad),
        "--out",
        s(&dir.path().join("f.json")),
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn perfect_detector_scores_one() {
    let dir = tempfile::tempdir().unwrap();
    let ds = dir.path().join("ds.json");
    ok(&["synth", "--images", "20", "--out", s(&ds)]);
    let prof = dir.path().join("p.json");
    fs::write(&prof, r#"[{"model_id": "oracle"}]"#).unwrap();
    let dets = dir.path().join("dets");
    ok(&[
        "simulate",
        "--dataset",
        s(&ds),
        "--profiles",
        s(&prof),
        "--out",
        s(&dets),
    ]);
    let report = dir.path().join("r.json");
    ok(&[
        "eval",
        "--gt",
        s(&ds),
        "--dets",
        s(&dets.join("oracle.json")),
        "--coco-range",
        "--out",
        s(&report),
    ]);
    let r = json(&report);
    assert_eq!(r["map_50"], 1.0);
    assert_eq!(r["map_50_95"], 1.0);
    assert_eq!(r["accuracy"], 1.0);
}

#[test]
fn one_hot_fusion_reproduces_each_model() {
    let dir = tempfile::tempdir().unwrap();
    let (ds, dets) = workspace(dir.path());
    for (k, single) in dets.iter().enumerate() {
        let weights = if k == 0 { "1,0" } else { "0,1" };
        let fused = dir.path().join(format!("fused{k}.json"));
        ok(&[
            "fuse",
            "--dets",
            s(&dets[0]),
            s(&dets[1]),
            "--weights",
            weights,
            "--accept",
            "0",
            "--out",
            s(&fused),
        ]);
        let a = dir.path().join(format!("single{k}.report.json"));
        let b = dir.path().join(format!("fused{k}.report.json"));
        ok(&[
            "eval",
            "--gt",
            s(&ds),
            "--dets",
            s(single),
            "--coco-range",
            "--out",
            s(&a),
        ]);
        ok(&[
            "eval",
            "--gt",
            s(&ds),
            "--dets",
            s(&fused),
            "--coco-range",
            "--out",
            s(&b),
        ]);
        assert_eq!(json(&a), json(&b), "model {k}");
    }
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let ds = dir.path().join("ds.json");
    ok(&["synth", "--images", "40", "--out", s(&ds)]);
    let cfg = dir.path().join("split.json");
    fs::write(
        &cfg,
        r#"{"train": 0.5, "val": 0.25, "test": 0.25, "seed": 3}"#,
    )
    .unwrap();
    let out = dir.path().join("sp");
    ok(&[
        "split",
        "--dataset",
        s(&ds),
        "--config",
        s(&cfg),
        "--seed",
        "11",
        "--out",
        s(&out),
    ]);
    let m = json(&out.join("manifest.json"));
    assert_eq!(m["config"]["train"], 0.5);
    assert_eq!(m["config"]["seed"], 11);

    fs::write(&cfg, r#"{"train": 0.5, "typo": 1}"#).unwrap();
    let bad = fuselab(&[
        "split",
        "--dataset",
        s(&ds),
        "--config",
        s(&cfg),
        "--out",
        s(&out),
    ]);
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn tuned_config_feeds_fuse() {
    let dir = tempfile::tempdir().unwrap();
    let (ds, dets) = workspace(dir.path());
    let tuned = dir.path().join("out/tuned.json");
    ok(&[
        "tune",
        "--gt",
        s(&ds),
        "--dets",
        s(&dets[0]),
        s(&dets[1]),
        "--resolution",
        "0.25",
        "--nms",
        "0.5",
        "--out",
        s(&tuned),
    ]);
    let trace = fs::read_to_string(dir.path().join("out/tuned.trace.csv")).unwrap();
    assert_eq!(trace.lines().next(), Some("w_alpha,w_beta,objective,best"));
    assert_eq!(trace.lines().count(), 1 + 5);

    let fused = dir.path().join("f.json");
    ok(&[
        "fuse",
        "--dets",
        s(&dets[0]),
        s(&dets[1]),
        "--config",
        s(&tuned),
        "--out",
        s(&fused),
    ]);
    let m = json(&dir.path().join("f.manifest.json"));
    assert_eq!(m["config"], json(&tuned));
    assert!(m["timing"]["fusion_seconds"].as_f64().unwrap() >= 0.0);
    assert_eq!(m["inputs"].as_array().unwrap().len(), 3);
}

#[test]
fn eval_side_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let (ds, dets) = workspace(dir.path());
    let report = dir.path().join("r.json");
    let csv = dir.path().join("r.csv");
    ok(&[
        "eval",
        "--gt",
        s(&ds),
        "--dets",
        s(&dets[1]),
        "--csv",
        s(&csv),
        "--inputs",
        s(&dets[0]),
        s(&dets[1]),
        "--out",
        s(&report),
    ]);
    let table = fs::read_to_string(&csv).unwrap();
    assert_eq!(
        table.lines().next(),
        Some("class,ground_truth,detections,ap@0.50,f1")
    );
    let r = json(&report);
    assert_eq!(r["runtime"]["per_model"]["beta"], 0.5);
    assert_eq!(r["runtime"]["per_model"]["alpha"], 0.0);
    assert_eq!(r["runtime"]["ensemble"], 0.5);
}

#[test]
fn image_paths_survive_relocation() {
    let dir = tempfile::tempdir().unwrap();
    let img_dir = dir.path().join("raw/images");
    let lbl_dir = dir.path().join("raw/labels");
    fs::create_dir_all(&img_dir).unwrap();
    fs::create_dir_all(&lbl_dir).unwrap();
    for (i, label) in ["0 0.5 0.5 0.5 0.5\n", "3 0.25 0.5 0.1 0.2\n"]
        .iter()
        .enumerate()
    {
        image::GrayImage::from_fn(20, 10, |x, _| image::Luma([(x * 12) as u8]))
            .save(img_dir.join(format!("b{i}.png")))
            .unwrap();
        fs::write(lbl_dir.join(format!("b{i}.txt")), label).unwrap();
    }
    let ds = dir.path().join("data/all.json");
    ok(&[
        "import-yolo",
        "--images",
        s(&img_dir),
        "--labels",
        s(&lbl_dir),
        "--out",
        s(&ds),
    ]);
    let split = dir.path().join("data/split");
    ok(&[
        "split",
        "--dataset",
        s(&ds),
        "--train",
        "0.5",
        "--val",
        "0.5",
        "--test",
        "0",
        "--out",
        s(&split),
    ]);
    let pre = dir.path().join("pre");
    ok(&[
        "preprocess",
        "--dataset",
        s(&split.join("train.json")),
        "--size",
        "16",
        "--binarize",
        "--out",
        s(&pre),
    ]);
    let out = json(&pre.join("dataset.json"));
    let img = &out["images"][0];
    assert_eq!(
        (img["width"].as_u64(), img["height"].as_u64()),
        (Some(16), Some(16))
    );
    let png = image::open(pre.join(img["path"].as_str().unwrap()))
        .unwrap()
        .to_luma8();
    assert!(png.pixels().all(|p| p.0[0] == 0 || p.0[0] == 255));
}

#[test]
fn subset_scores_one_split_of_a_larger_run() {
    let dir = tempfile::tempdir().unwrap();
    let (ds, dets) = workspace(dir.path());
    let split = dir.path().join("split");
    ok(&["split", "--dataset", s(&ds), "--out", s(&split)]);
    let test = split.join("test.json");
    let report = dir.path().join("r.json");
    let strict = fuselab(&[
        "eval",
        "--gt",
        s(&test),
        "--dets",
        s(&dets[0]),
        "--out",
        s(&report),
    ]);
    assert_eq!(strict.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&strict.stderr).contains("unknown image id"));
    ok(&[
        "eval",
        "--gt",
        s(&test),
        "--dets",
        s(&dets[0]),
        "--subset",
        "--out",
        s(&report),
    ]);
    let r = json(&report);
    let gt_objects: u64 = json(&test)["images"]
        .as_array()
        .unwrap()
        .iter()
        .map(|i| i["objects"].as_array().unwrap().len() as u64)
        .sum();
    let c = &r["confusion"];
    assert_eq!(
        c["tp"].as_u64().unwrap() + c["fn"].as_u64().unwrap(),
        gt_objects
    );
}
