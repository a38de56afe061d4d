//! Detection evaluation: greedy IoU matching, per-class average precision,
//! mAP at one or many IoU gates, confusion-based ratios and runtime
//! summaries.

mod confusion;
mod matching;
pub mod overlay;

use std::collections::BTreeMap;
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

pub use confusion::{confusion_metrics, ConfusionCounts, ConfusionMetrics};
pub use matching::{average_precision, match_detections};

use crate::data_model::{DatasetIndex, DefectClass, Detection, DetectionSet};
use crate::error::{Error, Result};
use crate::par;

/// `0.50, 0.55, ..., 0.95`.
pub fn coco_thresholds() -> Vec<f64> {
    (10..=19).map(|k| k as f64 * 5.0 / 100.0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawEvalConfig")]
pub struct EvalConfig {
    iou_thresholds: Vec<f64>,
    score_threshold: f64,
    classes: Vec<DefectClass>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEvalConfig {
    #[serde(default = "single_gate")]
    iou_thresholds: Vec<f64>,
    #[serde(default = "default_score_threshold")]
    score_threshold: f64,
    #[serde(default = "all_classes")]
    classes: Vec<DefectClass>,
}

fn single_gate() -> Vec<f64> {
    vec![0.5]
}

fn default_score_threshold() -> f64 {
    0.5
}

fn all_classes() -> Vec<DefectClass> {
    DefectClass::ALL.to_vec()
}

impl TryFrom<RawEvalConfig> for EvalConfig {
    type Error = Error;

    fn try_from(r: RawEvalConfig) -> Result<Self> {
        EvalConfig::new(r.iou_thresholds, r.score_threshold, r.classes)
    }
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self::single(0.5)
    }
}

impl EvalConfig {
    pub fn new(
        iou_thresholds: Vec<f64>,
        score_threshold: f64,
        classes: Vec<DefectClass>,
    ) -> Result<Self> {
        if iou_thresholds.is_empty() {
            return Err(Error::config("at least one IoU threshold is required"));
        }
        if let Some(t) = iou_thresholds.iter().find(|t| !(**t > 0.0 && **t <= 1.0)) {
            return Err(Error::config(format!(
                "IoU thresholds must lie in (0, 1], got {t}"
            )));
        }
        if iou_thresholds.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::config("IoU thresholds must be strictly increasing"));
        }
        if !(0.0..=1.0).contains(&score_threshold) {
            return Err(Error::config(format!(
                "score threshold must lie in [0, 1], got {score_threshold}"
            )));
        }
        if classes.is_empty() {
            return Err(Error::config("at least one class must be evaluated"));
        }
        let mut sorted = classes.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != classes.len() {
            return Err(Error::config("class list contains duplicates"));
        }
        Ok(Self {
            iou_thresholds,
            score_threshold,
            classes: sorted,
        })
    }

    /// One IoU gate, score threshold 0.5, all classes.
    pub fn single(iou_t: f64) -> Self {
        Self::new(vec![iou_t], default_score_threshold(), all_classes())
            .expect("valid single-gate config")
    }

    /// The ten gates 0.50..0.95, score threshold 0.5, all classes.
    pub fn coco_range() -> Self {
        Self::new(coco_thresholds(), default_score_threshold(), all_classes())
            .expect("valid range config")
    }

    pub fn with_score_threshold(mut self, t: f64) -> Result<Self> {
        self = Self::new(self.iou_thresholds, t, self.classes)?;
        Ok(self)
    }

    pub fn iou_thresholds(&self) -> &[f64] {
        &self.iou_thresholds
    }

    pub fn score_threshold(&self) -> f64 {
        self.score_threshold
    }

    pub fn classes(&self) -> &[DefectClass] {
        &self.classes
    }

    fn is_coco_range(&self) -> bool {
        self.iou_thresholds == coco_thresholds()
    }
}

/// AP for every `(class, threshold)` cell: `table[c][t]`.
pub fn ap_table(
    dets: &[&Detection],
    gt: &DatasetIndex,
    thresholds: &[f64],
    classes: &[DefectClass],
) -> Vec<Vec<Option<f64>>> {
    let cells = par::map_range(classes.len() * thresholds.len(), |k| {
        let (c, t) = (k / thresholds.len(), k % thresholds.len());
        average_precision(dets, gt, classes[c], thresholds[t])
    });
    cells
        .chunks(thresholds.len())
        .map(|row| row.to_vec())
        .collect()
}

/// Mean over the classes whose AP is defined.
pub fn mean_ap(aps: &[Option<f64>]) -> Result<f64> {
    let defined: Vec<f64> = aps.iter().flatten().copied().collect();
    if defined.is_empty() {
        return Err(Error::Evaluation(
            "no class has ground truth, mAP is undefined".into(),
        ));
    }
    if defined.iter().all(|a| *a == defined[0]) {
        return Ok(defined[0]);
    }
    Ok(defined.iter().sum::<f64>() / defined.len() as f64)
}

/// mAP over all classes at one IoU gate.
pub fn map_at(dets: &[&Detection], gt: &DatasetIndex, iou_t: f64) -> Result<f64> {
    let table = ap_table(dets, gt, &[iou_t], &DefectClass::ALL);
    mean_ap(&table.iter().map(|row| row[0]).collect::<Vec<_>>())
}

/// Mean of the single-gate mAPs over 0.50..0.95.
pub fn map_range(dets: &[&Detection], gt: &DatasetIndex) -> Result<f64> {
    let thresholds = coco_thresholds();
    let table = ap_table(dets, gt, &thresholds, &DefectClass::ALL);
    mean_of_maps(&table, thresholds.len())
}

fn mean_of_maps(table: &[Vec<Option<f64>>], n_thresholds: usize) -> Result<f64> {
    let mut total = 0.0;
    for t in 0..n_thresholds {
        total += mean_ap(&table.iter().map(|row| row[t]).collect::<Vec<_>>())?;
    }
    Ok(total / n_thresholds as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassReport {
    pub class: DefectClass,
    pub ground_truth: usize,
    pub detections: usize,
    /// One entry per IoU threshold; `null` when the class has no ground truth.
    pub ap: Vec<Option<f64>>,
    /// At IoU 0.5 after the score threshold.
    pub f1: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub iou_thresholds: Vec<f64>,
    pub score_threshold: f64,
    pub classes: Vec<ClassReport>,
    /// Classes left out of the mAP mean for lack of ground truth.
    pub excluded_classes: Vec<DefectClass>,
    /// Mean over all configured thresholds.
    pub map: f64,
    pub map_50: Option<f64>,
    pub map_50_95: Option<f64>,
    pub confusion: ConfusionCounts,
    pub image_level_confusion: ConfusionCounts,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    /// Ratios whose denominator was zero and were reported as 1.0.
    pub defaulted: Vec<&'static str>,
    pub mean_runtime_per_image: Option<f64>,
    /// Per-model timings of the ensemble inputs, filled in by callers that
    /// have them.
    pub runtime: Option<RuntimeSummary>,
}

/// Full report for one detection set. Detections must reference images of
/// `gt`.
pub fn evaluate(set: &DetectionSet, gt: &DatasetIndex, config: &EvalConfig) -> Result<EvalReport> {
    set.check_images(gt)?;
    let dets: Vec<&Detection> = set.detections().iter().collect();
    let thresholds = config.iou_thresholds();
    let table = ap_table(&dets, gt, thresholds, config.classes());

    let mut maps = Vec::with_capacity(thresholds.len());
    for t in 0..thresholds.len() {
        maps.push(mean_ap(
            &table.iter().map(|row| row[t]).collect::<Vec<_>>(),
        )?);
    }
    let map = mean_of_maps(&table, thresholds.len())?;
    let map_50 = thresholds.iter().position(|t| *t == 0.5).map(|i| maps[i]);
    let map_50_95 = config.is_coco_range().then_some(map);

    let confusion = confusion_metrics(&dets, gt, config.score_threshold());
    let per_class = confusion::per_class_counts(&dets, gt, config.score_threshold());
    let classes = config
        .classes()
        .iter()
        .zip(table)
        .map(|(&class, ap)| ClassReport {
            class,
            ground_truth: gt.class_counts().get(class),
            detections: dets.iter().filter(|d| d.class == class).count(),
            ap,
            f1: per_class[class.index()].f1(),
        })
        .collect::<Vec<_>>();
    let excluded_classes = classes
        .iter()
        .filter(|c| c.ground_truth == 0)
        .map(|c| c.class)
        .collect();

    Ok(EvalReport {
        iou_thresholds: thresholds.to_vec(),
        score_threshold: config.score_threshold(),
        classes,
        excluded_classes,
        map,
        map_50,
        map_50_95,
        confusion: confusion.instance,
        image_level_confusion: confusion.image_level,
        accuracy: confusion.accuracy,
        precision: confusion.precision,
        recall: confusion.recall,
        defaulted: confusion.defaulted,
        mean_runtime_per_image: set.runtime_seconds().and_then(mean_runtime),
        runtime: None,
    })
}

/// Detections of `set` that fall on images of `gt`.
pub fn restrict(set: &DetectionSet, gt: &DatasetIndex) -> Result<DetectionSet> {
    let dets = set
        .detections()
        .iter()
        .filter(|d| gt.get(&d.image_id).is_some())
        .cloned()
        .collect();
    let runtime = set.runtime_seconds().map(|m| {
        m.iter()
            .filter(|(id, _)| gt.get(id).is_some())
            .map(|(id, t)| (id.clone(), *t))
            .collect()
    });
    DetectionSet::new(set.model_id(), dets, runtime)
}

fn mean_runtime(map: &BTreeMap<String, f64>) -> Option<f64> {
    (!map.is_empty()).then(|| map.values().sum::<f64>() / map.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RuntimeSummary {
    /// Mean seconds per image for each model that reported timings.
    pub per_model: IndexMap<String, f64>,
    /// Sum of the per-model means.
    pub base_sum: f64,
    pub fusion_seconds_per_image: Option<f64>,
    /// `base_sum` plus fusion time.
    pub ensemble: f64,
}

/// Mean runtimes of the given sets and their ensemble total. `None` when no
/// set carries timings.
pub fn aggregate_runtime(
    sets: &[DetectionSet],
    fusion_seconds_per_image: Option<f64>,
) -> Option<RuntimeSummary> {
    let per_model: IndexMap<String, f64> = sets
        .iter()
        .filter_map(|s| {
            Some((
                s.model_id().to_string(),
                mean_runtime(s.runtime_seconds()?)?,
            ))
        })
        .collect();
    if per_model.is_empty() {
        return None;
    }
    let base_sum: f64 = per_model.values().sum();
    Some(RuntimeSummary {
        per_model,
        base_sum,
        fusion_seconds_per_image,
        ensemble: base_sum + fusion_seconds_per_image.unwrap_or(0.0),
    })
}

/// Per-class table: class, ground truth, detections, one AP column per
/// threshold, F1. Undefined values are left empty.
pub fn write_class_csv(report: &EvalReport, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let csv_err = |e: csv::Error| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Evaluation(format!("CSV output failed: {other:?}")),
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    let mut header = vec![
        "class".to_string(),
        "ground_truth".into(),
        "detections".into(),
    ];
    header.extend(report.iou_thresholds.iter().map(|t| format!("ap@{t:.2}")));
    header.push("f1".into());
    w.write_record(&header).map_err(csv_err)?;
    let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
    for c in &report.classes {
        let mut row = vec![
            c.class.as_str().to_string(),
            c.ground_truth.to_string(),
            c.detections.to_string(),
        ];
        row.extend(c.ap.iter().map(|a| opt(*a)));
        row.push(opt(c.f1));
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
