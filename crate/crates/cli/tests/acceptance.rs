//! Acceptance gate: runs every criterion, prints one PASS/FAIL line each,
//! and exits non-zero if any failed.

#[path = "../../core/tests/support/oracles.rs"]
mod oracles;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use fuselab::data_model::{
    save_dataset, DatasetIndex, DefectClass, Detection, DetectionSet, GroundTruthObject,
    ImageRecord,
};
use fuselab::evaluator::{
    average_precision, coco_thresholds, confusion_metrics, evaluate, map_at, map_range, restrict,
    EvalConfig,
};
use fuselab::fusion::{fuse, to_detection_set, Dedup, EnsembleConfig};
use fuselab::geometry::{iou, BoundingBox};
use fuselab::preprocess::{
    apply_augment, binarize_otsu, otsu_threshold, resize, AugmentOp, RasterImage,
};
use fuselab::simulator::{simulate, synthetic_dataset, SimModelProfile, SynthSpec};
use fuselab::splitter::{balanced_split, dominant_group, SplitGroup, SplitSpec};
use fuselab::tuner::{tune_weights, Objective, TuneMethod, TuneSpec};
use oracles::{brute_force_ap, exhaustive_otsu, raster_iou, OracleDet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn iou_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut int_box = || {
        let (a, b) = (rng.random_range(0..64i64), rng.random_range(0..64i64));
        let (c, d) = (rng.random_range(0..64i64), rng.random_range(0..64i64));
        [a.min(b), c.min(d), a.max(b) + 1, c.max(d) + 1]
    };
    let pairs: Vec<([i64; 4], [i64; 4])> = (0..1000).map(|_| (int_box(), int_box())).collect();
    let to_box =
        |b: [i64; 4]| BoundingBox::new(b[0] as f64, b[1] as f64, b[2] as f64, b[3] as f64).unwrap();

    let start = Instant::now();
    let got: Vec<f64> = pairs
        .iter()
        .map(|&(a, b)| iou(&to_box(a), &to_box(b)))
        .collect();
    let elapsed = start.elapsed();

    let mut worst = 0.0f64;
    for (&(a, b), g) in pairs.iter().zip(&got) {
        worst = worst.max((g - raster_iou(a, b)).abs());
    }
    check(worst <= 1e-12, || format!("max |iou - raster| = {worst:e}"))?;
    check(elapsed < Duration::from_secs(1), || {
        format!("took {elapsed:?}")
    })?;
    Ok(format!("1000 pairs, max error {worst:e}, {elapsed:?}"))
}

const AP_CLASS: DefectClass = DefectClass::Scratch;

fn library_ap(dets: &[OracleDet], gts: &[Vec<[f64; 4]>]) -> Option<f64> {
    let images = gts
        .iter()
        .enumerate()
        .map(|(i, boxes)| ImageRecord {
            id: format!("i{i}"),
            path: format!("i{i}.png"),
            width: 64,
            height: 64,
            objects: boxes
                .iter()
                .map(|&b| GroundTruthObject {
                    class: AP_CLASS,
                    bbox: b.try_into().unwrap(),
                })
                .collect(),
        })
        .collect();
    let gt = DatasetIndex::new(images).unwrap();
    let owned: Vec<Detection> = dets
        .iter()
        .map(|d| Detection {
            image_id: format!("i{}", d.image),
            class: AP_CLASS,
            bbox: d.bbox.try_into().unwrap(),
            score: d.score,
            model_id: "m".into(),
        })
        .collect();
    let refs: Vec<&Detection> = owned.iter().collect();
    average_precision(&refs, &gt, AP_CLASS, 0.5)
}

fn ap_oracle() -> Outcome {
    let g1 = [0.0, 0.0, 8.0, 8.0];
    let g2 = [20.0, 20.0, 28.0, 28.0];
    let hand = [
        OracleDet {
            image: 0,
            bbox: g1,
            score: 0.9,
        },
        OracleDet {
            image: 0,
            bbox: [40.0, 40.0, 48.0, 48.0],
            score: 0.8,
        },
        OracleDet {
            image: 0,
            bbox: g2,
            score: 0.7,
        },
    ];
    let hand_ap = library_ap(&hand, &[vec![g1, g2]]).unwrap_or(f64::NAN);
    check((hand_ap - 5.0 / 6.0).abs() <= 1e-12, || {
        format!("hand case gave {hand_ap}")
    })?;

    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let grid_box = |rng: &mut ChaCha8Rng| {
        let (x, y) = (
            rng.random_range(0..8) as f64 * 4.0,
            rng.random_range(0..8) as f64 * 4.0,
        );
        let (w, h) = (
            rng.random_range(1..4) as f64 * 4.0,
            rng.random_range(1..4) as f64 * 4.0,
        );
        [x, y, x + w, y + h]
    };
    let mut worst = 0.0f64;
    for case in 0..500 {
        let n_img = rng.random_range(1..=2);
        let mut gts = vec![Vec::new(); n_img];
        for _ in 0..rng.random_range(0..=4) {
            let img = rng.random_range(0..n_img);
            gts[img].push(grid_box(&mut rng));
        }
        let dets: Vec<OracleDet> = (0..rng.random_range(0..=6))
            .map(|_| OracleDet {
                image: rng.random_range(0..n_img),
                bbox: grid_box(&mut rng),
                score: rng.random_range(1..=5) as f64 / 5.0,
            })
            .collect();
        match (library_ap(&dets, &gts), brute_force_ap(&dets, &gts, 0.5)) {
            (Some(a), Some(b)) => worst = worst.max((a - b).abs()),
            (None, None) => {}
            (a, b) => return Err(format!("case {case}: {a:?} vs oracle {b:?}")),
        }
    }
    check(worst <= 1e-12, || format!("max |ap - oracle| = {worst:e}"))?;
    Ok(format!(
        "hand case {hand_ap:.6}, 500 instances, max error {worst:e}"
    ))
}

/// The four detector profiles of the simulation study.
fn study_profiles() -> Vec<SimModelProfile> {
    let miss = [0.10, 0.15, 0.20, 0.30];
    let fp = [0.5, 1.0, 1.0, 1.5];
    (0..4)
        .map(|k| SimModelProfile {
            miss_rate: miss[k],
            fp_per_image: fp[k],
            loc_sigma: 2.0,
            confusion_rate: 0.05,
            ..SimModelProfile::new(format!("det{}", k + 1))
        })
        .collect()
}

fn study_dataset(seed: u64) -> DatasetIndex {
    synthetic_dataset(&SynthSpec {
        images: 200,
        width: 600,
        height: 600,
        seed,
        ..SynthSpec::default()
    })
    .unwrap()
}

fn fusion_degeneracy() -> Outcome {
    let gt = study_dataset(11);
    let sets = simulate(&gt, &study_profiles(), 11).unwrap();
    let ids: Vec<&str> = sets.iter().map(DetectionSet::model_id).collect();
    let eval_config = EvalConfig::coco_range();
    for (k, set) in sets.iter().enumerate() {
        let weights: Vec<(String, f64)> = ids
            .iter()
            .enumerate()
            .map(|(j, m)| (m.to_string(), (j == k) as u8 as f64))
            .collect();
        let config = EnsembleConfig::normalized(weights, 0.5, 0.0, Dedup::Off).unwrap();
        let fused = to_detection_set(
            &fuse(&sets, &config).unwrap(),
            set.runtime_seconds().cloned(),
        )
        .unwrap();
        let single = evaluate(set, &gt, &eval_config).unwrap();
        let ensemble = evaluate(&fused, &gt, &eval_config).unwrap();
        check(single == ensemble, || {
            format!("model {} report differs", ids[k])
        })?;
    }
    Ok(format!(
        "{} one-hot ensembles reproduce their model's report",
        sets.len()
    ))
}

fn map_50(set: &DetectionSet, gt: &DatasetIndex) -> f64 {
    let dets: Vec<&Detection> = set.detections().iter().collect();
    map_at(&dets, gt, 0.5).unwrap()
}

fn ensemble_gain() -> Outcome {
    let start = Instant::now();
    let spec = TuneSpec {
        method: TuneMethod::Grid { resolution: 0.25 },
        objective: Objective::Map50,
        score_threshold: 0.5,
    };
    let (mut at_least, mut strictly) = (0, 0);
    let mut diffs = Vec::new();
    for seed in 0..20u64 {
        let gt = study_dataset(seed);
        let sets = simulate(&gt, &study_profiles(), seed).unwrap();
        // Weights are tuned on one half and scored on the other.
        let halves = balanced_split(&gt, &SplitSpec::new(0.5, 0.0, 0.5, seed).unwrap()).unwrap();
        let ids: Vec<&str> = sets.iter().map(DetectionSet::model_id).collect();
        let mut base = EnsembleConfig::uniform(&ids).unwrap();
        base.set_accept_threshold(0.0).unwrap();
        base.set_dedup(Dedup::Nms(0.5)).unwrap();
        let tuned = tune_weights(&halves.train, &sets, &spec, &base).unwrap();

        let held_out: Vec<DetectionSet> = sets
            .iter()
            .map(|s| restrict(s, &halves.test).unwrap())
            .collect();
        let best_single = held_out
            .iter()
            .map(|s| map_50(s, &halves.test))
            .fold(f64::MIN, f64::max);
        let fused = to_detection_set(&fuse(&held_out, &tuned.config).unwrap(), None).unwrap();
        let diff = map_50(&fused, &halves.test) - best_single;
        at_least += (diff >= -0.01) as usize;
        strictly += (diff > 0.0) as usize;
        diffs.push(diff);
    }
    let elapsed = start.elapsed();
    let (lo, hi) = diffs
        .iter()
        .fold((f64::MAX, f64::MIN), |(l, h), &d| (l.min(d), h.max(d)));
    let summary = format!(
        "not worse by >0.01 on {at_least}/20, strictly better on {strictly}/20, gain {lo:+.3}..{hi:+.3}, {elapsed:.1?}"
    );
    check(
        at_least >= 18 && strictly >= 10 && elapsed < Duration::from_secs(60),
        || summary.clone(),
    )?;
    Ok(summary)
}

fn split_balance() -> Outcome {
    let ds = synthetic_dataset(&SynthSpec {
        images: 1000,
        class_weights: vec![16.0, 8.0, 4.0, 4.0, 2.0, 1.0, 1.0, 0.5],
        min_objects: 1,
        max_objects: 3,
        defect_free_fraction: 0.05,
        seed: 5,
        ..SynthSpec::default()
    })
    .unwrap();
    let spec = SplitSpec::new(0.7, 0.15, 0.15, 21).unwrap();
    let result = balanced_split(&ds, &spec).unwrap();

    let mut per_group: BTreeMap<SplitGroup, [usize; 4]> = BTreeMap::new();
    for img in ds.images() {
        per_group.entry(dominant_group(img)).or_default()[0] += 1;
    }
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    for (slot, part) in [&result.train, &result.val, &result.test]
        .into_iter()
        .enumerate()
    {
        for img in part.images() {
            *seen.entry(img.id.clone()).or_default() += 1;
            per_group.get_mut(&dominant_group(img)).unwrap()[slot + 1] += 1;
        }
    }
    check(
        seen.len() == ds.len() && seen.values().all(|&n| n == 1),
        || "partition is not disjoint and exhaustive".into(),
    )?;
    for (group, [n, tr, va, te]) in &per_group {
        let n = *n as f64;
        for (got, frac) in [(tr, 0.7), (va, 0.15), (te, 0.15)] {
            check((*got as f64 - frac * n).abs() <= 1.0, || {
                format!("group {group}: {tr}/{va}/{te} of {n}")
            })?;
        }
    }

    let dir = tempfile::tempdir().unwrap();
    let write = |tag: &str| -> Vec<u8> {
        let r = balanced_split(&ds, &spec).unwrap();
        let mut bytes = Vec::new();
        for (name, part) in [("train", &r.train), ("val", &r.val), ("test", &r.test)] {
            let p = dir.path().join(format!("{tag}_{name}.json"));
            save_dataset(part, &p).unwrap();
            bytes.extend(fs::read(&p).unwrap());
        }
        bytes
    };
    check(write("a") == write("b"), || {
        "same seed gave different bytes".into()
    })?;
    Ok(format!(
        "{} groups within one image of 70/15/15, deterministic",
        per_group.len()
    ))
}

fn random_gray(rng: &mut ChaCha8Rng, w: u32, h: u32) -> RasterImage {
    let step = rng.random_range(1..=128u8);
    let pixels = (0..w * h)
        .map(|_| rng.random::<u8>() / step * step)
        .collect();
    RasterImage::new(w, h, 1, pixels).unwrap()
}

fn random_boxes(rng: &mut ChaCha8Rng, w: u32, h: u32) -> Vec<GroundTruthObject> {
    (0..rng.random_range(1..5))
        .map(|_| {
            let a = (
                rng.random_range(0.0..w as f64),
                rng.random_range(0.0..h as f64),
            );
            let b = (
                rng.random_range(0.0..w as f64),
                rng.random_range(0.0..h as f64),
            );
            let bbox = BoundingBox::from_corners(
                a,
                (
                    b.0.max(a.0 + 0.5).min(w as f64),
                    b.1.max(a.1 + 0.5).min(h as f64),
                ),
            )
            .or_else(|_| BoundingBox::new(0.0, 0.0, 1.0, 1.0))
            .unwrap();
            GroundTruthObject {
                class: DefectClass::Short,
                bbox,
            }
        })
        .collect()
}

fn preprocessing_invariants() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for i in 0..100 {
        let img = random_gray(&mut rng, 32, 32);
        let t = otsu_threshold(&img);
        check(t == exhaustive_otsu(img.pixels()), || {
            format!("image {i}: threshold {t:?}")
        })?;
        let bin = binarize_otsu(&img).unwrap();
        check(bin.pixels().iter().all(|&v| v == 0 || v == 255), || {
            format!("image {i}: non-binary output")
        })?;
    }

    let same = |a: &[GroundTruthObject], b: &[GroundTruthObject]| {
        a.iter().zip(b).all(|(x, y)| {
            x.bbox
                .to_array()
                .iter()
                .zip(y.bbox.to_array())
                .all(|(p, q)| (p - q).abs() < 1e-9)
        })
    };
    let ops = [
        AugmentOp::Rotate { angle_degrees: 90 },
        AugmentOp::Rotate { angle_degrees: 180 },
        AugmentOp::Rotate { angle_degrees: 270 },
        AugmentOp::FlipHorizontal,
        AugmentOp::FlipVertical,
        AugmentOp::Brightness { factor: 1.3 },
        AugmentOp::Rescale { factor: 0.7 },
        AugmentOp::Rescale { factor: 1.9 },
    ];
    for i in 0..100 {
        let (w, h) = (rng.random_range(2..40), rng.random_range(2..40));
        let img = random_gray(&mut rng, w, h);
        let boxes = random_boxes(&mut rng, w, h);

        let (mut r, mut rb) = (img.clone(), boxes.clone());
        for _ in 0..4 {
            (r, rb) = apply_augment(&r, &rb, ops[0]).unwrap();
        }
        check(r == img && same(&rb, &boxes), || {
            format!("case {i}: rot90^4 is not identity")
        })?;

        for flip in [AugmentOp::FlipHorizontal, AugmentOp::FlipVertical] {
            let (f1, b1) = apply_augment(&img, &boxes, flip).unwrap();
            let (f2, b2) = apply_augment(&f1, &b1, flip).unwrap();
            check(f2 == img && same(&b2, &boxes), || {
                format!("case {i}: {flip} is not an involution")
            })?;
        }
        for op in ops {
            let (out, ob) = apply_augment(&img, &boxes, op).unwrap();
            check(
                ob.iter()
                    .all(|o| o.bbox.within(out.width() as f64, out.height() as f64)),
                || format!("case {i}: {op} moved a box out of frame"),
            )?;
        }
        let (tw, th) = (rng.random_range(1..64), rng.random_range(1..64));
        let resized = resize(&img, tw, th).unwrap();
        check((resized.width(), resized.height()) == (tw, th), || {
            format!("case {i}: resize size")
        })?;
    }
    Ok("100 Otsu images match, 100 augment/resize cases hold".into())
}

fn map_range_consistency() -> Outcome {
    let thresholds = coco_thresholds();
    let want: Vec<f64> = (10..=19).map(|k| k as f64 * 0.05).collect();
    check(
        thresholds.len() == 10
            && thresholds
                .iter()
                .zip(&want)
                .all(|(a, b)| (a - b).abs() < 1e-15),
        || format!("thresholds {thresholds:?}"),
    )?;
    let mut worst = 0.0f64;
    for seed in 0..5 {
        let gt = study_dataset(100 + seed);
        for set in simulate(&gt, &study_profiles(), seed).unwrap() {
            let dets: Vec<&Detection> = set.detections().iter().collect();
            let mean = thresholds
                .iter()
                .map(|&t| map_at(&dets, &gt, t).unwrap())
                .sum::<f64>()
                / 10.0;
            worst = worst.max((map_range(&dets, &gt).unwrap() - mean).abs());
        }
    }
    check(worst <= 1e-12, || format!("max deviation {worst:e}"))?;
    Ok(format!("20 simulated sets, max deviation {worst:e}"))
}

fn run_cli(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_fuselab"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    check(out.status.success(), || {
        format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr))
    })
}

fn data_files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut files = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            let name = p.strip_prefix(dir).unwrap().display().to_string();
            if p.is_dir() {
                stack.push(p);
            } else if !name.ends_with("manifest.json") {
                files.insert(name, fs::read(&p).unwrap());
            }
        }
    }
    files
}

fn end_to_end_determinism() -> Outcome {
    let root = tempfile::tempdir().unwrap();
    let profiles = root.path().join("profiles.json");
    let json = serde_json::to_string(&study_profiles()).unwrap();
    fs::write(&profiles, json).unwrap();
    let mut runs = Vec::new();
    for run in ["a", "b"] {
        let dir = root.path().join(run);
        let p = |s: &str| dir.join(s).display().to_string();
        run_cli(&[
            "synth",
            "--images",
            "50",
            "--seed",
            "8",
            "--out",
            &p("gt.json"),
        ])?;
        run_cli(&[
            "simulate",
            "--dataset",
            &p("gt.json"),
            "--profiles",
            &profiles.display().to_string(),
            "--seed",
            "8",
            "--out",
            &p("dets"),
        ])?;
        let dets: Vec<String> = (1..=4).map(|k| p(&format!("dets/det{k}.json"))).collect();
        let mut fuse_args = vec!["fuse", "--dets"];
        fuse_args.extend(dets.iter().map(String::as_str));
        let fused = p("fused.json");
        fuse_args.extend(["--nms", "0.5", "--out", &fused]);
        run_cli(&fuse_args)?;
        run_cli(&[
            "eval",
            "--gt",
            &p("gt.json"),
            "--dets",
            &fused,
            "--coco-range",
            "--csv",
            &p("report.csv"),
            "--out",
            &p("report.json"),
        ])?;
        runs.push(data_files(&dir));
    }
    check(runs[0].len() == 8, || {
        format!("expected 8 data files, found {:?}", runs[0].keys())
    })?;
    for (name, bytes) in &runs[0] {
        check(runs[1].get(name) == Some(bytes), || {
            format!("{name} differs between runs")
        })?;
    }
    Ok(format!(
        "{} data files byte-identical across two runs",
        runs[0].len()
    ))
}

fn record(id: usize, objects: usize) -> ImageRecord {
    ImageRecord {
        id: format!("img{id:03}"),
        path: format!("img{id:03}.png"),
        width: 100,
        height: 100,
        objects: (0..objects)
            .map(|k| GroundTruthObject {
                class: DefectClass::Spur,
                bbox: BoundingBox::new(10.0 * k as f64, 0.0, 10.0 * k as f64 + 8.0, 8.0).unwrap(),
            })
            .collect(),
    }
}

fn hit(img: &ImageRecord, k: usize) -> Detection {
    Detection {
        image_id: img.id.clone(),
        class: DefectClass::Spur,
        bbox: img.objects[k].bbox,
        score: 0.9,
        model_id: "m".into(),
    }
}

fn stray(img: &ImageRecord) -> Detection {
    Detection {
        image_id: img.id.clone(),
        class: DefectClass::Spur,
        bbox: BoundingBox::new(80.0, 80.0, 95.0, 95.0).unwrap(),
        score: 0.9,
        model_id: "m".into(),
    }
}

fn confusion_arithmetic() -> Outcome {
    // 95 defective boards (93 flagged, 2 missed), 5 clean (3 flagged).
    let images: Vec<ImageRecord> = (0..100).map(|i| record(i, (i < 95) as usize)).collect();
    let mut dets: Vec<Detection> = images[..93].iter().map(|img| hit(img, 0)).collect();
    dets.extend(images[95..98].iter().map(stray));
    let gt = DatasetIndex::new(images).unwrap();
    let m = confusion_metrics(&dets.iter().collect::<Vec<_>>(), &gt, 0.5);
    let il = m.image_level;
    check((il.tp, il.tn, il.fp, il.r#fn) == (93, 2, 3, 2), || {
        format!("image-level {il:?}")
    })?;
    check(m.accuracy == 0.95, || format!("accuracy {}", m.accuracy))?;

    // Ten objects, eight found, two stray boxes.
    let images: Vec<ImageRecord> = (0..5).map(|i| record(i, 2)).collect();
    let mut dets: Vec<Detection> = images
        .iter()
        .flat_map(|img| [hit(img, 0), hit(img, 1)])
        .take(8)
        .collect();
    dets.extend(images[..2].iter().map(stray));
    let gt = DatasetIndex::new(images).unwrap();
    let m = confusion_metrics(&dets.iter().collect::<Vec<_>>(), &gt, 0.5);
    check((m.instance.tp, m.instance.fp) == (8, 2), || {
        format!("instance {:?}", m.instance)
    })?;
    check(m.precision == 0.8 && m.recall == 0.8, || {
        format!("p {} r {}", m.precision, m.recall)
    })?;

    // Clean boards and a silent detector.
    let gt = DatasetIndex::new((0..10).map(|i| record(i, 0)).collect()).unwrap();
    let m = confusion_metrics(&[], &gt, 0.5);
    check(m.accuracy == 1.0 && m.image_level.tn == 10, || {
        format!("all-clean {m:?}")
    })?;
    check(m.precision == 1.0 && m.recall == 1.0, || {
        format!("all-clean {m:?}")
    })?;
    check(
        m.defaulted.contains(&"precision") && m.defaulted.contains(&"recall"),
        || format!("defaulted {:?}", m.defaulted),
    )?;

    // Objects present, nothing predicted: precision defaults, recall is 0.
    let gt = DatasetIndex::new((0..4).map(|i| record(i, 1)).collect()).unwrap();
    let m = confusion_metrics(&[], &gt, 0.5);
    check(
        m.precision == 1.0 && m.recall == 0.0 && m.accuracy == 0.0,
        || format!("silent {m:?}"),
    )?;
    check(m.defaulted == ["precision"], || {
        format!("defaulted {:?}", m.defaulted)
    })?;
    Ok("accuracy 0.95, precision 0.8, all-negative world and zero-denominator defaults".into())
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("iou matches raster oracle", iou_oracle),
        ("average precision matches brute-force oracle", ap_oracle),
        ("one-hot fusion reproduces single model", fusion_degeneracy),
        ("tuned ensemble beats best single model", ensemble_gain),
        ("balanced split", split_balance),
        ("preprocessing invariants", preprocessing_invariants),
        (
            "mAP@[.5:.95] is the mean of ten thresholds",
            map_range_consistency,
        ),
        ("cli chain is deterministic", end_to_end_determinism),
        ("confusion arithmetic", confusion_arithmetic),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        match run() {
            Ok(detail) => println!("PASS {}. {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {}. {name}: {detail}", i + 1);
            }
        }
    }
    println!(
        "{}/{} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
