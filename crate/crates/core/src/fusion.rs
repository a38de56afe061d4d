//! Weighted consensus fusion of multi-model detections.
//!
//! Every box reported by any participating model becomes an anchor. For each
//! anchor the other models are searched for overlapping boxes
//! (`IoU >= match_iou`); each model contributes its best matching score per
//! class, the anchor's own model contributes the anchor's score. The
//! consensus for class `c` is
//!
//! ```text
//! s(c) = sum_m  w_m * p_m(c)        (p_m(c) = 0 when model m has no match)
//! ```
//!
//! The anchor is relabelled with the class of highest consensus (ties go to
//! canonical class order) and kept iff that consensus reaches the
//! acceptance threshold. Nothing is merged geometrically; an optional
//! class-aware NMS pass removes near-duplicate anchors afterwards.
//!
//! Models with weight zero sit outside the ensemble: they neither seed
//! anchors nor lend support.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::data_model::{
    write_detection_entries, DefectClass, Detection, DetectionEntry, DetectionSet, SourceEntry,
};
use crate::error::{Error, Result};
use crate::geometry::{iou, nms_indices, BoundingBox};
use crate::par;

/// Model id written into fused output files.
pub const ENSEMBLE_MODEL_ID: &str = "ensemble";

const WEIGHT_SUM_TOLERANCE: f64 = 1e-9;

/// Post-fusion deduplication.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dedup {
    #[default]
    Off,
    /// Class-aware NMS ranked by consensus.
    Nms(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawConfig")]
pub struct EnsembleConfig {
    model_weights: IndexMap<String, f64>,
    match_iou: f64,
    accept_threshold: f64,
    dedup: Dedup,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    model_weights: IndexMap<String, f64>,
    #[serde(default = "default_match_iou")]
    match_iou: f64,
    #[serde(default = "default_accept", alias = "accept")]
    accept_threshold: f64,
    #[serde(default)]
    dedup: Dedup,
}

fn default_match_iou() -> f64 {
    0.5
}

fn default_accept() -> f64 {
    0.25
}

impl TryFrom<RawConfig> for EnsembleConfig {
    type Error = Error;

    fn try_from(r: RawConfig) -> Result<Self> {
        EnsembleConfig::new(r.model_weights, r.match_iou, r.accept_threshold, r.dedup)
    }
}

impl EnsembleConfig {
    /// Validates weights (non-negative, summing to 1 within 1e-9, at least
    /// one model) and thresholds.
    pub fn new(
        model_weights: IndexMap<String, f64>,
        match_iou: f64,
        accept_threshold: f64,
        dedup: Dedup,
    ) -> Result<Self> {
        if model_weights.is_empty() {
            return Err(Error::config("ensemble needs at least one model"));
        }
        if let Some((m, w)) = model_weights
            .iter()
            .find(|(_, w)| !(w.is_finite() && **w >= 0.0))
        {
            return Err(Error::config(format!(
                "weight of model {m:?} must be non-negative, got {w}"
            )));
        }
        let sum: f64 = model_weights.values().sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
            return Err(Error::config(format!(
                "model weights must sum to 1, got {sum}"
            )));
        }
        if !(match_iou > 0.0 && match_iou <= 1.0) {
            return Err(Error::config(format!(
                "match IoU must lie in (0, 1], got {match_iou}"
            )));
        }
        if !(0.0..=1.0).contains(&accept_threshold) {
            return Err(Error::config(format!(
                "acceptance threshold must lie in [0, 1], got {accept_threshold}"
            )));
        }
        if let Dedup::Nms(t) = dedup {
            if !(t > 0.0 && t <= 1.0) {
                return Err(Error::config(format!(
                    "NMS threshold must lie in (0, 1], got {t}"
                )));
            }
        }
        Ok(Self {
            model_weights,
            match_iou,
            accept_threshold,
            dedup,
        })
    }

    /// Equal weights for the given models with default thresholds.
    pub fn uniform<S: AsRef<str>>(models: &[S]) -> Result<Self> {
        let raw = models
            .iter()
            .map(|m| (m.as_ref().to_string(), 1.0))
            .collect::<Vec<_>>();
        Self::normalized(raw, default_match_iou(), default_accept(), Dedup::Off)
    }

    /// Builds a config from arbitrary non-negative weights by dividing
    /// through by their sum.
    pub fn normalized(
        raw: Vec<(String, f64)>,
        match_iou: f64,
        accept_threshold: f64,
        dedup: Dedup,
    ) -> Result<Self> {
        let sum: f64 = raw.iter().map(|(_, w)| *w).sum();
        if !(sum.is_finite() && sum > 0.0) {
            return Err(Error::config(format!(
                "weights must have a positive finite sum, got {sum}"
            )));
        }
        let weights = raw.into_iter().map(|(m, w)| (m, w / sum)).collect();
        Self::new(weights, match_iou, accept_threshold, dedup)
    }

    /// Same thresholds, new weights (given in this config's model order).
    pub fn with_weights(&self, weights: &[f64]) -> Result<Self> {
        if weights.len() != self.model_weights.len() {
            return Err(Error::config(format!(
                "expected {} weights, got {}",
                self.model_weights.len(),
                weights.len()
            )));
        }
        let map = self
            .model_weights
            .keys()
            .cloned()
            .zip(weights.iter().copied())
            .collect();
        Self::new(map, self.match_iou, self.accept_threshold, self.dedup)
    }

    pub fn model_weights(&self) -> &IndexMap<String, f64> {
        &self.model_weights
    }

    pub fn weight_vector(&self) -> Vec<f64> {
        self.model_weights.values().copied().collect()
    }

    pub fn weight(&self, model: &str) -> Option<f64> {
        self.model_weights.get(model).copied()
    }

    pub fn match_iou(&self) -> f64 {
        self.match_iou
    }

    pub fn accept_threshold(&self) -> f64 {
        self.accept_threshold
    }

    pub fn dedup(&self) -> Dedup {
        self.dedup
    }

    pub fn set_match_iou(&mut self, v: f64) -> Result<()> {
        *self = Self::new(
            self.model_weights.clone(),
            v,
            self.accept_threshold,
            self.dedup,
        )?;
        Ok(())
    }

    pub fn set_accept_threshold(&mut self, v: f64) -> Result<()> {
        *self = Self::new(self.model_weights.clone(), self.match_iou, v, self.dedup)?;
        Ok(())
    }

    pub fn set_dedup(&mut self, d: Dedup) -> Result<()> {
        *self = Self::new(
            self.model_weights.clone(),
            self.match_iou,
            self.accept_threshold,
            d,
        )?;
        Ok(())
    }
}

/// One model's evidence for a candidate class.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SourceScore {
    pub model_id: String,
    /// `None` when the model had no matching box of that class.
    pub score: Option<f64>,
}

/// Per-model, per-class support around one anchor.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportTable {
    /// Model ids, one per row of `scores`.
    pub models: Vec<String>,
    /// `scores[m][c]`: best matching score of model `m` for class index `c`.
    pub scores: Vec<[Option<f64>; DefectClass::COUNT]>,
    /// Classes seen among matched boxes plus the anchor's class, canonical order.
    pub candidates: Vec<DefectClass>,
}

impl SupportTable {
    /// Evidence for `class` in the shape consumed by [`consensus_score`].
    pub fn for_class(&self, class: DefectClass) -> Vec<SourceScore> {
        self.models
            .iter()
            .zip(&self.scores)
            .map(|(m, row)| SourceScore {
                model_id: m.clone(),
                score: row[class.index()],
            })
            .collect()
    }
}

fn support_from(
    anchor: &Detection,
    anchor_model: usize,
    models: &[&str],
    per_model: &[Vec<&Detection>],
    match_iou: f64,
) -> SupportTable {
    let mut scores = vec![[None; DefectClass::COUNT]; models.len()];
    let mut seen = [false; DefectClass::COUNT];
    seen[anchor.class.index()] = true;
    scores[anchor_model][anchor.class.index()] = Some(anchor.score);
    for (m, dets) in per_model.iter().enumerate() {
        if m == anchor_model {
            continue;
        }
        for d in dets {
            if iou(&anchor.bbox, &d.bbox) >= match_iou {
                let slot = &mut scores[m][d.class.index()];
                if slot.is_none_or(|s| d.score > s) {
                    *slot = Some(d.score);
                }
                seen[d.class.index()] = true;
            }
        }
    }
    SupportTable {
        models: models.iter().map(|m| m.to_string()).collect(),
        scores,
        candidates: DefectClass::ALL
            .into_iter()
            .filter(|c| seen[c.index()])
            .collect(),
    }
}

/// Collects cross-model support for `anchor` from `sets` (one per model).
///
/// The anchor's own model is identified by `anchor.model_id` and
/// contributes only the anchor's score; other models contribute, per class,
/// the best score among their boxes on the same image with
/// `IoU >= match_iou`.
pub fn gather_support(anchor: &Detection, sets: &[DetectionSet], match_iou: f64) -> SupportTable {
    let mut models: Vec<&str> = sets.iter().map(|s| s.model_id()).collect();
    let anchor_model = match models.iter().position(|m| *m == anchor.model_id) {
        Some(i) => i,
        None => {
            models.push(&anchor.model_id);
            models.len() - 1
        }
    };
    let mut per_model: Vec<Vec<&Detection>> = sets
        .iter()
        .map(|s| {
            s.detections()
                .iter()
                .filter(|d| d.image_id == anchor.image_id)
                .collect()
        })
        .collect();
    per_model.resize(models.len(), Vec::new());
    support_from(anchor, anchor_model, &models, &per_model, match_iou)
}

/// Weighted consensus `sum_m w_m * p_m` over the ensemble's models, in
/// config order, with absent evidence counting as zero. Clamped to [0, 1]
/// against rounding.
pub fn consensus_score(support: &[SourceScore], config: &EnsembleConfig) -> Result<f64> {
    for s in support {
        if !config.model_weights.contains_key(&s.model_id) {
            return Err(Error::config(format!(
                "model {:?} has no weight",
                s.model_id
            )));
        }
    }
    let mut total = 0.0;
    for (model, w) in &config.model_weights {
        let p = support
            .iter()
            .find(|s| &s.model_id == model)
            .and_then(|s| s.score)
            .unwrap_or(0.0);
        total += w * p;
    }
    Ok(total.clamp(0.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FusedDetection {
    pub image_id: String,
    pub class: DefectClass,
    pub bbox: BoundingBox,
    pub consensus: f64,
    /// Evidence for the chosen class from every participating model.
    pub sources: Vec<SourceScore>,
    pub anchor_model: String,
}

struct Candidate {
    fused: FusedDetection,
    anchor_rank: (usize, usize),
}

fn output_order(a: &Candidate, b: &Candidate) -> Ordering {
    let (fa, fb) = (&a.fused, &b.fused);
    fa.image_id
        .cmp(&fb.image_id)
        .then(fb.consensus.total_cmp(&fa.consensus))
        .then(fa.bbox.x_min().total_cmp(&fb.bbox.x_min()))
        .then(fa.bbox.y_min().total_cmp(&fb.bbox.y_min()))
        .then(a.anchor_rank.cmp(&b.anchor_rank))
}

/// One image's detections, bucketed by model position.
type PerModel<'a> = Vec<Vec<(usize, &'a Detection)>>;

/// Fuses the detection sets under `config`.
///
/// Output is sorted by image id, then descending consensus, then `x_min`.
/// Without dedup the output holds one entry per participating detection
/// whose consensus reaches the acceptance threshold.
pub fn fuse(sets: &[DetectionSet], config: &EnsembleConfig) -> Result<Vec<FusedDetection>> {
    let mut seen = HashSet::new();
    for s in sets {
        if !seen.insert(s.model_id()) {
            return Err(Error::config(format!(
                "model {:?} supplied twice",
                s.model_id()
            )));
        }
        if !config.model_weights.contains_key(s.model_id()) {
            return Err(Error::config(format!(
                "model {:?} has no weight",
                s.model_id()
            )));
        }
    }
    // Participating models in config order.
    let active: Vec<&DetectionSet> = config
        .model_weights
        .iter()
        .filter(|(_, w)| **w > 0.0)
        .filter_map(|(m, _)| sets.iter().find(|s| s.model_id() == m))
        .collect();
    let models: Vec<&str> = active.iter().map(|s| s.model_id()).collect();

    let mut by_image: BTreeMap<&str, PerModel> = BTreeMap::new();
    for (m, set) in active.iter().enumerate() {
        for (i, d) in set.detections().iter().enumerate() {
            by_image
                .entry(d.image_id.as_str())
                .or_insert_with(|| vec![Vec::new(); active.len()])[m]
                .push((i, d));
        }
    }
    let images: Vec<(&str, PerModel)> = by_image.into_iter().collect();

    let per_image = par::map(&images, |(_, per_model)| {
        fuse_image(per_model, &models, config)
    });
    let mut out = Vec::new();
    for r in per_image {
        out.extend(r?);
    }
    Ok(out)
}

fn fuse_image(
    per_model: &[Vec<(usize, &Detection)>],
    models: &[&str],
    config: &EnsembleConfig,
) -> Result<Vec<FusedDetection>> {
    let plain: Vec<Vec<&Detection>> = per_model
        .iter()
        .map(|v| v.iter().map(|(_, d)| *d).collect())
        .collect();
    let mut candidates = Vec::new();
    for (m, dets) in per_model.iter().enumerate() {
        for &(i, anchor) in dets {
            let table = support_from(anchor, m, models, &plain, config.match_iou);
            let mut best: Option<(DefectClass, f64, Vec<SourceScore>)> = None;
            for &c in &table.candidates {
                let support = table.for_class(c);
                let s = consensus_score(&support, config)?;
                if best.as_ref().is_none_or(|(_, b, _)| s > *b) {
                    best = Some((c, s, support));
                }
            }
            let (class, consensus, sources) = best.expect("anchor class is always a candidate");
            if consensus >= config.accept_threshold {
                candidates.push(Candidate {
                    fused: FusedDetection {
                        image_id: anchor.image_id.clone(),
                        class,
                        bbox: anchor.bbox,
                        consensus,
                        sources,
                        anchor_model: models[m].to_string(),
                    },
                    anchor_rank: (m, i),
                });
            }
        }
    }
    candidates.sort_by(output_order);

    let kept: Vec<FusedDetection> = match config.dedup {
        Dedup::Off => candidates.into_iter().map(|c| c.fused).collect(),
        Dedup::Nms(t) => {
            let keyed: Vec<(BoundingBox, f64, DefectClass)> = candidates
                .iter()
                .map(|c| (c.fused.bbox, c.fused.consensus, c.fused.class))
                .collect();
            let mut keep = vec![false; candidates.len()];
            for i in nms_indices(&keyed, t, true)? {
                keep[i] = true;
            }
            candidates
                .into_iter()
                .zip(keep)
                .filter(|(_, k)| *k)
                .map(|(c, _)| c.fused)
                .collect()
        }
    };
    Ok(kept)
}

/// Views fused output as an ordinary detection set scored by consensus.
pub fn to_detection_set(
    fused: &[FusedDetection],
    runtime_seconds: Option<BTreeMap<String, f64>>,
) -> Result<DetectionSet> {
    let dets = fused
        .iter()
        .map(|f| Detection {
            image_id: f.image_id.clone(),
            class: f.class,
            bbox: f.bbox,
            score: f.consensus,
            model_id: ENSEMBLE_MODEL_ID.to_string(),
        })
        .collect();
    DetectionSet::new(ENSEMBLE_MODEL_ID, dets, runtime_seconds)
}

/// Per-image runtime of the ensemble inputs: the sum over participating
/// models that report timings. `None` when none do.
pub fn summed_runtime(
    sets: &[DetectionSet],
    config: &EnsembleConfig,
) -> Option<BTreeMap<String, f64>> {
    let timed: Vec<&BTreeMap<String, f64>> = sets
        .iter()
        .filter(|s| config.weight(s.model_id()).is_some_and(|w| w > 0.0))
        .filter_map(|s| s.runtime_seconds())
        .collect();
    if timed.is_empty() {
        return None;
    }
    let mut total: BTreeMap<String, f64> = BTreeMap::new();
    for map in timed {
        for (id, t) in map {
            *total.entry(id.clone()).or_insert(0.0) += t;
        }
    }
    Some(total)
}

/// Writes fused output as a detections file (`model: "ensemble"`) with the
/// `consensus`, `sources` and `anchor_model` extension fields.
pub fn save_fused(
    fused: &[FusedDetection],
    runtime_seconds: Option<BTreeMap<String, f64>>,
    path: impl AsRef<Path>,
) -> Result<()> {
    let entries = fused
        .iter()
        .map(|f| DetectionEntry {
            image_id: f.image_id.clone(),
            class: f.class.as_str().to_string(),
            bbox: f.bbox.to_array(),
            score: f.consensus,
            consensus: Some(f.consensus),
            sources: Some(
                f.sources
                    .iter()
                    .map(|s| SourceEntry {
                        model: s.model_id.clone(),
                        score: s.score,
                    })
                    .collect(),
            ),
            anchor_model: Some(f.anchor_model.clone()),
        })
        .collect();
    write_detection_entries(ENSEMBLE_MODEL_ID, entries, runtime_seconds, path.as_ref())
}
