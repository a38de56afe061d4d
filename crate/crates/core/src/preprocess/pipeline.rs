use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::augment::{apply_augment, AugmentOp};
use super::otsu::binarize_otsu;
use super::raster::{resize, to_grayscale, RasterImage};
use crate::data_model::{DatasetIndex, GroundTruthObject, ImageRecord};
use crate::error::{Error, Result};
use crate::geometry::BoundingBox;
use crate::{par, rng};

/// Settings for [`preprocess_pipeline`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessConfig {
    pub width: u32,
    pub height: u32,
    pub binarize: bool,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            width: 600,
            height: 600,
            binarize: false,
        }
    }
}

/// An image the pipeline could not process.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImageFailure {
    pub id: String,
    pub message: String,
}

/// Result of a batch image job: the new index (paths relative to the output
/// directory) and the images that were skipped, ordered by id.
#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub index: DatasetIndex,
    pub failures: Vec<ImageFailure>,
}

/// Resolves an image path from a dataset file; relative paths are taken
/// relative to `base_dir`.
pub fn resolve_image_path(base_dir: Option<&Path>, path: &str) -> PathBuf {
    let p = Path::new(path);
    match base_dir {
        Some(base) if p.is_relative() => base.join(p),
        _ => p.to_path_buf(),
    }
}

fn sanitize(id: &str) -> String {
    id.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') {
                c
            } else {
                '_'
            }
        })
        .collect()
}

/// Assigns each id a distinct, filesystem-safe file stem: characters
/// outside `[A-Za-z0-9._-]` become `_` and repeats get a `~k` suffix.
pub fn file_stems<'a>(ids: impl Iterator<Item = &'a str>) -> Vec<String> {
    let mut used = HashSet::new();
    ids.map(|id| {
        let base = sanitize(id);
        let mut stem = base.clone();
        let mut k = 1;
        while !used.insert(stem.clone()) {
            stem = format!("{base}~{k}");
            k += 1;
        }
        stem
    })
    .collect()
}

fn image_dir(out_dir: &Path) -> Result<PathBuf> {
    let dir = out_dir.join("images");
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    Ok(dir)
}

fn scale_boxes(
    objects: &[GroundTruthObject],
    sx: f64,
    sy: f64,
    w: f64,
    h: f64,
) -> Result<Vec<GroundTruthObject>> {
    objects
        .iter()
        .map(|o| {
            let b = &o.bbox;
            Ok(GroundTruthObject {
                class: o.class,
                bbox: BoundingBox::new(
                    (b.x_min() * sx).min(w),
                    (b.y_min() * sy).min(h),
                    (b.x_max() * sx).min(w),
                    (b.y_max() * sy).min(h),
                )?,
            })
        })
        .collect()
}

fn collect(
    results: Vec<std::result::Result<Vec<ImageRecord>, ImageFailure>>,
) -> Result<PipelineOutput> {
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(recs) => records.extend(recs),
            Err(f) => failures.push(f),
        }
    }
    failures.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(PipelineOutput {
        index: DatasetIndex::new(records)?,
        failures,
    })
}

/// Grayscale, optionally binarize, and resize every image, writing PNGs to
/// `out_dir/images/`. Boxes are rescaled by the same per-axis ratios.
/// Unreadable images are skipped and reported rather than aborting the run.
pub fn preprocess_pipeline(
    dataset: &DatasetIndex,
    base_dir: Option<&Path>,
    config: &PreprocessConfig,
    out_dir: &Path,
) -> Result<PipelineOutput> {
    if config.width == 0 || config.height == 0 {
        return Err(Error::config(format!(
            "target size must be positive, got {}x{}",
            config.width, config.height
        )));
    }
    let dir = image_dir(out_dir)?;
    let stems = file_stems(dataset.images().iter().map(|i| i.id.as_str()));
    let jobs: Vec<(&ImageRecord, &String)> = dataset.images().iter().zip(&stems).collect();

    let results = par::map(&jobs, |(rec, stem)| {
        let fail = |e: Error| ImageFailure {
            id: rec.id.clone(),
            message: e.to_string(),
        };
        let run = || -> Result<ImageRecord> {
            let src = RasterImage::load(resolve_image_path(base_dir, &rec.path))?;
            let gray = if src.channels() == 3 {
                to_grayscale(&src)?
            } else {
                src
            };
            let gray = if config.binarize {
                binarize_otsu(&gray)?
            } else {
                gray
            };
            let sx = config.width as f64 / gray.width() as f64;
            let sy = config.height as f64 / gray.height() as f64;
            let out = resize(&gray, config.width, config.height)?;
            let rel = format!("images/{stem}.png");
            out.save_png(dir.join(format!("{stem}.png")))?;
            Ok(ImageRecord {
                id: rec.id.clone(),
                path: rel,
                width: config.width,
                height: config.height,
                objects: scale_boxes(
                    &rec.objects,
                    sx,
                    sy,
                    config.width as f64,
                    config.height as f64,
                )?,
            })
        };
        run().map(|r| vec![r]).map_err(fail)
    });
    collect(results)
}

/// Settings for [`augment_dataset`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentConfig {
    pub ops: Vec<AugmentOp>,
    /// Augmented variants emitted per source image.
    pub copies: u32,
    pub seed: u64,
}

/// Writes every source image plus `copies` augmented variants of it to
/// `out_dir/images/`. Each variant applies one op drawn uniformly from
/// `ops` by a stream seeded from `(seed, image position)`.
///
/// Meant for the training split only; augmenting before splitting would
/// leak near-duplicates across partitions.
pub fn augment_dataset(
    dataset: &DatasetIndex,
    base_dir: Option<&Path>,
    config: &AugmentConfig,
    out_dir: &Path,
) -> Result<PipelineOutput> {
    if config.ops.is_empty() {
        return Err(Error::config("at least one augmentation op is required"));
    }
    for op in &config.ops {
        op.validate()?;
    }
    let dir = image_dir(out_dir)?;
    let mut ids: Vec<String> = Vec::new();
    for rec in dataset.images() {
        ids.push(rec.id.clone());
        for k in 0..config.copies {
            ids.push(format!("{}__aug{k}", rec.id));
        }
    }
    let stems = file_stems(ids.iter().map(String::as_str));
    let per_image = 1 + config.copies as usize;

    let results = par::map_range(dataset.len(), |i| {
        let rec = &dataset.images()[i];
        let stems = &stems[i * per_image..(i + 1) * per_image];
        let run = || -> Result<Vec<ImageRecord>> {
            let src = RasterImage::load(resolve_image_path(base_dir, &rec.path))?;
            let mut out = Vec::with_capacity(per_image);
            let mut emit = |id: String,
                            stem: &str,
                            img: &RasterImage,
                            objects: Vec<GroundTruthObject>|
             -> Result<()> {
                img.save_png(dir.join(format!("{stem}.png")))?;
                out.push(ImageRecord {
                    id,
                    path: format!("images/{stem}.png"),
                    width: img.width(),
                    height: img.height(),
                    objects,
                });
                Ok(())
            };
            emit(rec.id.clone(), &stems[0], &src, rec.objects.clone())?;
            let mut rng = rng::stream(config.seed, rng::DOMAIN_AUGMENT, i as u64, 0);
            for k in 0..config.copies as usize {
                let op = config.ops[rng.random_range(0..config.ops.len())];
                let (img, objects) = apply_augment(&src, &rec.objects, op)?;
                emit(format!("{}__aug{k}", rec.id), &stems[k + 1], &img, objects)?;
            }
            Ok(out)
        };
        run().map_err(|e| ImageFailure {
            id: rec.id.clone(),
            message: e.to_string(),
        })
    });
    collect(results)
}
