use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use fuselab::data_model::{
    import_yolo_txt, load_dataset, load_detections, save_dataset, save_detections, write_json,
    DatasetIndex, DefectClass, Detection, DetectionSet, ImageRecord,
};
use fuselab::evaluator::{
    aggregate_runtime, evaluate, overlay::render_overlays, restrict, write_class_csv, EvalConfig,
};
use fuselab::fusion::{fuse, save_fused, summed_runtime, Dedup, EnsembleConfig};
use fuselab::preprocess::{
    augment_dataset, file_stems, preprocess_pipeline, AugmentConfig, AugmentOp, PipelineOutput,
    PreprocessConfig,
};
use fuselab::simulator::{load_profiles, simulate, synthetic_dataset, SynthSpec};
use fuselab::splitter::{balanced_split, SplitSpec};
use fuselab::tuner::{tune_weights, write_trace_csv, Objective, TuneMethod, TuneSpec};
use fuselab::Error;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::args::*;
use crate::error::{usage, CliResult};
use crate::manifest::{beside, Recorder};

fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    serde_json::from_str(&text).map_err(|e| {
        let location = format!("{}:{}:{}", path.display(), e.line(), e.column());
        let message = e.to_string();
        match e.classify() {
            serde_json::error::Category::Data => Error::Schema { location, message },
            _ => Error::Parse { location, message },
        }
        .into()
    })
}

/// Settings file contents, or all-default when no file was given.
fn settings<T: DeserializeOwned + Default>(
    path: Option<&PathBuf>,
    rec: &mut Recorder,
) -> CliResult<T> {
    match path {
        Some(p) => {
            rec.input(p);
            read_json(p)
        }
        None => Ok(T::default()),
    }
}

fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })?;
    Ok(())
}

/// Creates the directory a file output will land in.
fn ensure_parent(file: &Path) -> CliResult<()> {
    create_dir(&parent_dir(file))
}

fn parent_dir(file: &Path) -> PathBuf {
    match file.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

fn absolute(p: &Path) -> CliResult<PathBuf> {
    std::path::absolute(p).map_err(|e| {
        Error::Io {
            path: p.to_path_buf(),
            source: e,
        }
        .into()
    })
}

/// Re-expresses relative image paths, currently relative to `from_dir`, so
/// they resolve from `to_dir` instead.
fn rebase_paths(index: DatasetIndex, from_dir: &Path, to_dir: &Path) -> CliResult<DatasetIndex> {
    let from = absolute(from_dir)?;
    let to = absolute(to_dir)?;
    if from == to {
        return Ok(index);
    }
    let images = index
        .into_images()
        .into_iter()
        .map(|img| {
            if Path::new(&img.path).is_absolute() {
                return img;
            }
            let target = from.join(&img.path);
            let rel = pathdiff::diff_paths(&target, &to).unwrap_or(target);
            ImageRecord {
                path: rel.to_string_lossy().replace('\\', "/"),
                ..img
            }
        })
        .collect();
    Ok(DatasetIndex::new(images)?)
}

fn load_dataset_recorded(path: &Path, rec: &mut Recorder) -> CliResult<DatasetIndex> {
    rec.input(path);
    Ok(load_dataset(path)?)
}

fn load_sets(paths: &[PathBuf], rec: &mut Recorder) -> CliResult<Vec<DetectionSet>> {
    paths
        .iter()
        .map(|p| {
            rec.input(p);
            Ok(load_detections(p)?)
        })
        .collect()
}

fn report_failures(out: &PipelineOutput, out_dir: &Path, rec: &mut Recorder) -> CliResult<()> {
    for f in &out.failures {
        eprintln!("warning: skipped image {:?}: {}", f.id, f.message);
    }
    if !out.failures.is_empty() {
        let p = out_dir.join("failures.json");
        write_json(&out.failures, &p)?;
        rec.output(&p);
    }
    Ok(())
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct PreprocessSettings {
    size: Option<u32>,
    binarize: Option<bool>,
}

pub fn preprocess(a: &PreprocessArgs) -> CliResult<()> {
    let mut rec = Recorder::start("preprocess");
    let file: PreprocessSettings = settings(a.config.as_ref(), &mut rec)?;
    let size = a.size.or(file.size).unwrap_or(600);
    let config = PreprocessConfig {
        width: size,
        height: size,
        binarize: a.binarize || file.binarize.unwrap_or(false),
    };
    let dataset = load_dataset_recorded(&a.dataset, &mut rec)?;
    create_dir(&a.out)?;
    let out = preprocess_pipeline(&dataset, Some(&parent_dir(&a.dataset)), &config, &a.out)?;
    let ds_path = a.out.join("dataset.json");
    save_dataset(&out.index, &ds_path)?;
    rec.output(&ds_path);
    rec.output(&a.out.join("images"));
    report_failures(&out, &a.out, &mut rec)?;
    rec.finish(
        json!({ "size": size, "binarize": config.binarize }),
        &a.out.join("manifest.json"),
    )
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct AugmentSettings {
    ops: Option<Vec<String>>,
    copies: Option<u32>,
    seed: Option<u64>,
}

pub fn augment(a: &AugmentArgs) -> CliResult<()> {
    let mut rec = Recorder::start("augment");
    let file: AugmentSettings = settings(a.config.as_ref(), &mut rec)?;
    let names = a
        .ops
        .clone()
        .or(file.ops)
        .ok_or_else(|| usage("--ops is required (or set \"ops\" in --config)"))?;
    let ops = names
        .iter()
        .map(|s| s.trim().parse::<AugmentOp>())
        .collect::<Result<Vec<_>, _>>()?;
    let config = AugmentConfig {
        ops,
        copies: a.copies.or(file.copies).unwrap_or(1),
        seed: a.seed.or(file.seed).unwrap_or(0),
    };
    let dataset = load_dataset_recorded(&a.dataset, &mut rec)?;
    create_dir(&a.out)?;
    let out = augment_dataset(&dataset, Some(&parent_dir(&a.dataset)), &config, &a.out)?;
    let ds_path = a.out.join("dataset.json");
    save_dataset(&out.index, &ds_path)?;
    rec.output(&ds_path);
    rec.output(&a.out.join("images"));
    report_failures(&out, &a.out, &mut rec)?;
    let ops: Vec<String> = config.ops.iter().map(|o| o.to_string()).collect();
    rec.finish(
        json!({ "ops": ops, "copies": config.copies, "seed": config.seed }),
        &a.out.join("manifest.json"),
    )
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SplitSettings {
    train: Option<f64>,
    val: Option<f64>,
    test: Option<f64>,
    seed: Option<u64>,
}

pub fn split(a: &SplitArgs) -> CliResult<()> {
    let mut rec = Recorder::start("split");
    let file: SplitSettings = settings(a.config.as_ref(), &mut rec)?;
    let spec = SplitSpec::new(
        a.train.or(file.train).unwrap_or(0.7),
        a.val.or(file.val).unwrap_or(0.15),
        a.test.or(file.test).unwrap_or(0.15),
        a.seed.or(file.seed).unwrap_or(0),
    )?;
    let dataset = load_dataset_recorded(&a.dataset, &mut rec)?;
    let result = balanced_split(&dataset, &spec)?;
    create_dir(&a.out)?;
    let from = parent_dir(&a.dataset);
    for (name, part) in [
        ("train", result.train),
        ("val", result.val),
        ("test", result.test),
    ] {
        let p = a.out.join(format!("{name}.json"));
        save_dataset(&rebase_paths(part, &from, &a.out)?, &p)?;
        rec.output(&p);
    }
    let alloc = a.out.join("allocation.json");
    write_json(&result.allocation, &alloc)?;
    rec.output(&alloc);
    rec.finish(
        json!({ "train": spec.train_fraction, "val": spec.val_fraction, "test": spec.test_fraction, "seed": spec.seed }),
        &a.out.join("manifest.json"),
    )
}

pub fn simulate_cmd(a: &SimulateArgs) -> CliResult<()> {
    let mut rec = Recorder::start("simulate");
    let dataset = load_dataset_recorded(&a.dataset, &mut rec)?;
    rec.input(&a.profiles);
    let profiles = load_profiles(&a.profiles)?;
    let sets = simulate(&dataset, &profiles, a.seed)?;
    create_dir(&a.out)?;
    let stems = file_stems(profiles.iter().map(|p| p.model_id.as_str()));
    for (set, stem) in sets.iter().zip(&stems) {
        let p = a.out.join(format!("{stem}.json"));
        save_detections(set, &p)?;
        rec.output(&p);
    }
    rec.finish(
        json!({ "seed": a.seed, "profiles": profiles }),
        &a.out.join("manifest.json"),
    )
}

fn model_ids(sets: &[DetectionSet]) -> Vec<String> {
    sets.iter().map(|s| s.model_id().to_string()).collect()
}

/// Ensemble config from an optional file, then weight and threshold flags.
fn ensemble_config(
    sets: &[DetectionSet],
    file: Option<EnsembleConfig>,
    weights: Option<&[f64]>,
    match_iou: Option<f64>,
    accept: Option<f64>,
    nms: Option<f64>,
) -> CliResult<EnsembleConfig> {
    let ids = model_ids(sets);
    let mut config = match (weights, file) {
        (Some(w), file) => {
            if w.len() != ids.len() {
                return Err(usage(format!(
                    "--weights has {} values for {} detection files",
                    w.len(),
                    ids.len()
                )));
            }
            let base = file.unwrap_or(EnsembleConfig::uniform(&ids)?);
            EnsembleConfig::normalized(
                ids.iter().cloned().zip(w.iter().copied()).collect(),
                base.match_iou(),
                base.accept_threshold(),
                base.dedup(),
            )?
        }
        (None, Some(cfg)) => cfg,
        (None, None) => EnsembleConfig::uniform(&ids)?,
    };
    if let Some(v) = match_iou {
        config.set_match_iou(v)?;
    }
    if let Some(v) = accept {
        config.set_accept_threshold(v)?;
    }
    if let Some(t) = nms {
        config.set_dedup(Dedup::Nms(t))?;
    }
    Ok(config)
}

fn optional_config(
    path: Option<&PathBuf>,
    rec: &mut Recorder,
) -> CliResult<Option<EnsembleConfig>> {
    path.map(|p| {
        rec.input(p);
        read_json(p)
    })
    .transpose()
}

pub fn fuse_cmd(a: &FuseArgs) -> CliResult<()> {
    let mut rec = Recorder::start("fuse");
    let sets = load_sets(&a.dets, &mut rec)?;
    let file = optional_config(a.config.as_ref(), &mut rec)?;
    let config = ensemble_config(
        &sets,
        file,
        a.weights.as_deref(),
        a.match_iou,
        a.accept,
        a.nms,
    )?;

    let started = Instant::now();
    let fused = fuse(&sets, &config)?;
    let seconds = started.elapsed().as_secs_f64();

    ensure_parent(&a.out)?;
    save_fused(&fused, summed_runtime(&sets, &config), &a.out)?;
    rec.output(&a.out);
    let images: BTreeSet<&str> = sets
        .iter()
        .flat_map(|s| s.detections().iter().map(|d| d.image_id.as_str()))
        .collect();
    rec.timing(json!({
        "fusion_seconds": seconds,
        "fusion_seconds_per_image": if images.is_empty() { 0.0 } else { seconds / images.len() as f64 },
    }));
    rec.finish(
        serde_json::to_value(&config).expect("config serializes"),
        &beside(&a.out),
    )
}

pub fn eval_cmd(a: &EvalArgs) -> CliResult<()> {
    let mut rec = Recorder::start("eval");
    let file: Option<EvalConfig> = a
        .config
        .as_ref()
        .map(|p| {
            rec.input(p);
            read_json(p)
        })
        .transpose()?;
    let base = file.unwrap_or_default();
    let thresholds = if a.coco_range {
        fuselab::evaluator::coco_thresholds()
    } else if let Some(t) = a.iou {
        vec![t]
    } else {
        base.iou_thresholds().to_vec()
    };
    let config = EvalConfig::new(
        thresholds,
        a.score_threshold.unwrap_or(base.score_threshold()),
        base.classes().to_vec(),
    )?;

    let gt = load_dataset_recorded(&a.gt, &mut rec)?;
    rec.input(&a.dets);
    let mut set = load_detections(&a.dets)?;
    if a.subset {
        set = restrict(&set, &gt)?;
    }
    let mut report = evaluate(&set, &gt, &config)?;
    if !a.inputs.is_empty() {
        let mut inputs = load_sets(&a.inputs, &mut rec)?;
        if a.subset {
            inputs = inputs
                .iter()
                .map(|s| restrict(s, &gt))
                .collect::<fuselab::Result<_>>()?;
        }
        report.runtime = aggregate_runtime(&inputs, None);
    }
    ensure_parent(&a.out)?;
    write_json(&report, &a.out)?;
    rec.output(&a.out);
    if let Some(p) = &a.csv {
        ensure_parent(p)?;
        write_class_csv(&report, p)?;
        rec.output(p);
    }
    if let Some(dir) = &a.overlays {
        let dets: Vec<&Detection> = set.detections().iter().collect();
        render_overlays(&gt, Some(&parent_dir(&a.gt)), &dets, dir)?;
        rec.output(dir);
    }
    rec.finish(
        serde_json::to_value(&config).expect("config serializes"),
        &beside(&a.out),
    )
}

fn parse_method(name: &str, a: &TuneArgs) -> CliResult<TuneMethod> {
    match name {
        "grid" => Ok(TuneMethod::Grid {
            resolution: a.resolution.unwrap_or(0.05),
        }),
        "coord" | "coordinate_ascent" => Ok(TuneMethod::CoordinateAscent {
            max_rounds: a.max_rounds.unwrap_or(20),
            step: a.step.unwrap_or(0.05),
        }),
        "proportional" => Ok(TuneMethod::Proportional),
        other => Err(usage(format!(
            "unknown method {other:?} (expected grid, coord or proportional)"
        ))),
    }
}

#[derive(Serialize)]
struct TuneRecord<'a> {
    spec: &'a TuneSpec,
    base: &'a EnsembleConfig,
    objective_value: f64,
}

pub fn tune_cmd(a: &TuneArgs) -> CliResult<()> {
    let mut rec = Recorder::start("tune");
    let gt = load_dataset_recorded(&a.gt, &mut rec)?;
    let sets = load_sets(&a.dets, &mut rec)?;
    let file = optional_config(a.config.as_ref(), &mut rec)?;
    let base = ensemble_config(&sets, file, None, a.match_iou, a.accept, a.nms)?;
    let spec = TuneSpec {
        method: parse_method(a.method.as_deref().unwrap_or("grid"), a)?,
        objective: a
            .objective
            .as_deref()
            .map(str::parse::<Objective>)
            .transpose()?
            .unwrap_or_default(),
        score_threshold: a.score_threshold.unwrap_or(0.5),
    };
    let result = tune_weights(&gt, &sets, &spec, &base)?;
    ensure_parent(&a.out)?;
    write_json(&result.config, &a.out)?;
    rec.output(&a.out);
    let trace = a.trace.clone().unwrap_or_else(|| {
        let stem = a
            .out
            .file_stem()
            .map_or_else(|| "tune".into(), |s| s.to_string_lossy().into_owned());
        a.out.with_file_name(format!("{stem}.trace.csv"))
    });
    ensure_parent(&trace)?;
    write_trace_csv(&result, &trace)?;
    rec.output(&trace);
    let record = TuneRecord {
        spec: &spec,
        base: &base,
        objective_value: result.objective,
    };
    rec.finish(
        serde_json::to_value(&record).expect("record serializes"),
        &beside(&a.out),
    )
}

pub fn synth(a: &SynthArgs) -> CliResult<()> {
    let mut rec = Recorder::start("synth");
    let mut spec: SynthSpec = settings(a.config.as_ref(), &mut rec)?;
    if let Some(v) = a.images {
        spec.images = v;
    }
    if let Some(v) = a.width {
        spec.width = v;
    }
    if let Some(v) = a.height {
        spec.height = v;
    }
    if let Some(v) = &a.class_weights {
        spec.class_weights = v.clone();
    }
    if let Some(v) = a.min_objects {
        spec.min_objects = v;
    }
    if let Some(v) = a.max_objects {
        spec.max_objects = v;
    }
    if let Some(v) = a.defect_free_fraction {
        spec.defect_free_fraction = v;
    }
    if let Some(v) = a.seed {
        spec.seed = v;
    }
    let dataset = synthetic_dataset(&spec)?;
    ensure_parent(&a.out)?;
    save_dataset(&dataset, &a.out)?;
    rec.output(&a.out);
    rec.finish(
        serde_json::to_value(&spec).expect("spec serializes"),
        &beside(&a.out),
    )
}

pub fn import_yolo(a: &ImportYoloArgs) -> CliResult<()> {
    let mut rec = Recorder::start("import-yolo");
    let classes: Vec<DefectClass> = match &a.classes {
        Some(names) => names
            .iter()
            .map(|n| n.parse::<DefectClass>())
            .collect::<Result<_, _>>()?,
        None => DefectClass::ALL.to_vec(),
    };
    let dataset = import_yolo_txt(&a.images, &a.labels, &classes)?;
    let dataset = rebase_paths(dataset, Path::new("."), &parent_dir(&a.out))?;
    ensure_parent(&a.out)?;
    save_dataset(&dataset, &a.out)?;
    rec.output(&a.out);
    let names: Vec<&str> = classes.iter().map(|c| c.as_str()).collect();
    rec.finish(
        json!({ "images": a.images, "labels": a.labels, "classes": names }),
        &beside(&a.out),
    )
}
