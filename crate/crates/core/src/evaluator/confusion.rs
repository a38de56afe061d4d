use std::collections::{HashMap, HashSet};

use serde::Serialize;

use super::matching::match_detections;
use crate::data_model::{DatasetIndex, DefectClass, Detection};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    pub r#fn: usize,
    pub tn: usize,
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

impl ConfusionCounts {
    /// `(TP + TN) / (TP + TN + FP + FN)`; `None` on an empty population.
    pub fn accuracy(&self) -> Option<f64> {
        ratio(self.tp + self.tn, self.tp + self.tn + self.fp + self.r#fn)
    }

    /// `TP / (TP + FP)`; `None` without positive predictions.
    pub fn precision(&self) -> Option<f64> {
        ratio(self.tp, self.tp + self.fp)
    }

    /// `TP / (TP + FN)`; `None` without positives.
    pub fn recall(&self) -> Option<f64> {
        ratio(self.tp, self.tp + self.r#fn)
    }

    /// `2TP / (2TP + FP + FN)`; `None` when all three are zero.
    pub fn f1(&self) -> Option<f64> {
        ratio(2 * self.tp, 2 * self.tp + self.fp + self.r#fn)
    }
}

impl std::ops::AddAssign for ConfusionCounts {
    fn add_assign(&mut self, o: Self) {
        self.tp += o.tp;
        self.fp += o.fp;
        self.r#fn += o.r#fn;
        self.tn += o.tn;
    }
}

/// Counts and the three headline ratios.
///
/// Precision and recall come from instance-level counts (IoU 0.5 matching),
/// accuracy from image-level counts, where a defect-free image with no
/// surviving detection is a true negative. A ratio whose denominator is
/// zero is reported as 1.0 and named in `defaulted`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfusionMetrics {
    pub instance: ConfusionCounts,
    pub image_level: ConfusionCounts,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub defaulted: Vec<&'static str>,
}

impl ConfusionMetrics {
    pub fn from_counts(instance: ConfusionCounts, image_level: ConfusionCounts) -> Self {
        let mut defaulted = Vec::new();
        let mut take = |name, v: Option<f64>| {
            v.unwrap_or_else(|| {
                defaulted.push(name);
                1.0
            })
        };
        let accuracy = take("accuracy", image_level.accuracy());
        let precision = take("precision", instance.precision());
        let recall = take("recall", instance.recall());
        Self {
            instance,
            image_level,
            accuracy,
            precision,
            recall,
            defaulted,
        }
    }
}

pub(crate) const CONFUSION_IOU: f64 = 0.5;

/// Confusion counts of `dets` against `gt` after discarding detections
/// scored below `score_threshold`. Detections on images outside `gt` are
/// ignored.
pub fn confusion_metrics(
    dets: &[&Detection],
    gt: &DatasetIndex,
    score_threshold: f64,
) -> ConfusionMetrics {
    let mut per_image: HashMap<&str, Vec<&Detection>> = HashMap::new();
    for d in dets.iter().filter(|d| d.score >= score_threshold) {
        per_image.entry(d.image_id.as_str()).or_default().push(d);
    }
    let ids: HashSet<&str> = gt.images().iter().map(|i| i.id.as_str()).collect();
    per_image.retain(|id, _| ids.contains(id));

    let mut instance = ConfusionCounts::default();
    let mut image_level = ConfusionCounts::default();
    for img in gt.images() {
        let surviving = per_image
            .get(img.id.as_str())
            .map_or(&[][..], |v| v.as_slice());
        let matches = match_detections(surviving, &img.objects, CONFUSION_IOU, true);
        let tp = matches.iter().filter(|m| m.is_some()).count();
        instance.tp += tp;
        instance.fp += surviving.len() - tp;
        instance.r#fn += img.objects.len() - tp;

        match (!img.objects.is_empty(), !surviving.is_empty()) {
            (true, true) => image_level.tp += 1,
            (true, false) => image_level.r#fn += 1,
            (false, true) => image_level.fp += 1,
            (false, false) => image_level.tn += 1,
        }
    }
    ConfusionMetrics::from_counts(instance, image_level)
}

/// Instance-level counts split by class (detections by predicted class,
/// misses by true class), indexed by [`DefectClass::index`].
pub(crate) fn per_class_counts(
    dets: &[&Detection],
    gt: &DatasetIndex,
    score_threshold: f64,
) -> [ConfusionCounts; DefectClass::COUNT] {
    let mut per_image: HashMap<&str, Vec<&Detection>> = HashMap::new();
    for d in dets.iter().filter(|d| d.score >= score_threshold) {
        per_image.entry(d.image_id.as_str()).or_default().push(d);
    }
    let mut counts = [ConfusionCounts::default(); DefectClass::COUNT];
    for img in gt.images() {
        let surviving = per_image
            .get(img.id.as_str())
            .map_or(&[][..], |v| v.as_slice());
        let matches = match_detections(surviving, &img.objects, CONFUSION_IOU, true);
        let mut hit = vec![false; img.objects.len()];
        for (d, m) in surviving.iter().zip(&matches) {
            match m {
                Some(g) => {
                    counts[d.class.index()].tp += 1;
                    hit[*g] = true;
                }
                None => counts[d.class.index()].fp += 1,
            }
        }
        for (o, h) in img.objects.iter().zip(hit) {
            if !h {
                counts[o.class.index()].r#fn += 1;
            }
        }
    }
    counts
}
