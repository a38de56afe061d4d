use std::collections::HashMap;

use crate::data_model::{DatasetIndex, DefectClass, Detection, GroundTruthObject};
use crate::geometry::{iou, rank_order};

/// Indices of `dets` in evaluation order: descending score, then `x_min`,
/// then input order.
pub(crate) fn ranked(dets: &[&Detection]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| {
        rank_order(dets[a].score, &dets[a].bbox, dets[b].score, &dets[b].bbox).then(a.cmp(&b))
    });
    order
}

/// Greedy one-to-one matching on a single image.
///
/// Detections are visited in rank order; each takes the unmatched ground
/// truth with the highest IoU `>= iou_t` (same class when `class_aware`),
/// ties going to the lower ground-truth index. The result is indexed like
/// `dets`: `Some(gt index)` for a true positive, `None` for a false positive.
pub fn match_detections(
    dets: &[&Detection],
    gts: &[GroundTruthObject],
    iou_t: f64,
    class_aware: bool,
) -> Vec<Option<usize>> {
    let mut taken = vec![false; gts.len()];
    let mut result = vec![None; dets.len()];
    for i in ranked(dets) {
        let d = dets[i];
        let mut best: Option<(usize, f64)> = None;
        for (g, gt) in gts.iter().enumerate() {
            if taken[g] || (class_aware && gt.class != d.class) {
                continue;
            }
            let v = iou(&d.bbox, &gt.bbox);
            if v >= iou_t && best.is_none_or(|(_, b)| v > b) {
                best = Some((g, v));
            }
        }
        if let Some((g, _)) = best {
            taken[g] = true;
            result[i] = Some(g);
        }
    }
    result
}

/// Per-image ground truth of one class.
pub(crate) fn class_gts(
    gt: &DatasetIndex,
    class: DefectClass,
) -> HashMap<&str, Vec<GroundTruthObject>> {
    gt.images()
        .iter()
        .map(|img| {
            let objs = img
                .objects
                .iter()
                .filter(|o| o.class == class)
                .cloned()
                .collect();
            (img.id.as_str(), objs)
        })
        .collect()
}

/// True-positive flags for `dets` (one class, any images), indexed like
/// `dets`. Detections on images absent from `gts` count as false positives.
pub(crate) fn tp_flags(
    dets: &[&Detection],
    gts: &HashMap<&str, Vec<GroundTruthObject>>,
    iou_t: f64,
) -> Vec<bool> {
    let mut by_image: HashMap<&str, Vec<usize>> = HashMap::new();
    for (i, d) in dets.iter().enumerate() {
        by_image.entry(d.image_id.as_str()).or_default().push(i);
    }
    let mut flags = vec![false; dets.len()];
    for (image, idx) in by_image {
        let Some(image_gts) = gts.get(image) else {
            continue;
        };
        let local: Vec<&Detection> = idx.iter().map(|&i| dets[i]).collect();
        for (k, m) in match_detections(&local, image_gts, iou_t, true)
            .into_iter()
            .enumerate()
        {
            flags[idx[k]] = m.is_some();
        }
    }
    flags
}

/// All-points interpolated AP from scores, TP flags and the ground-truth
/// count.
///
/// Precision-recall points are taken at every distinct score cutoff, so
/// tied detections enter together. AP is the area under the precision
/// envelope (precision at recall `r` replaced by the best precision at any
/// recall `>= r`). `None` when there is no ground truth.
pub(crate) fn ap_from_flags(scores: &[f64], flags: &[bool], n_gt: usize) -> Option<f64> {
    if n_gt == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut points: Vec<(f64, f64)> = Vec::new(); // (recall, precision)
    let (mut tp, mut seen) = (0usize, 0usize);
    for (k, &i) in order.iter().enumerate() {
        seen += 1;
        tp += flags[i] as usize;
        let group_ends = order.get(k + 1).is_none_or(|&j| scores[j] != scores[i]);
        if group_ends {
            points.push((tp as f64 / n_gt as f64, tp as f64 / seen as f64));
        }
    }

    let mut envelope = 0.0f64;
    for p in points.iter_mut().rev() {
        envelope = envelope.max(p.1);
        p.1 = envelope;
    }
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for (r, p) in points {
        ap += (r - prev_recall) * p;
        prev_recall = r;
    }
    Some(ap)
}

/// Average precision of one class across all images at IoU `iou_t`.
///
/// Detections of other classes in `dets` are ignored. `None` when `gt`
/// holds no object of `class`.
pub fn average_precision(
    dets: &[&Detection],
    gt: &DatasetIndex,
    class: DefectClass,
    iou_t: f64,
) -> Option<f64> {
    let n_gt = gt.class_counts().get(class);
    let own: Vec<&Detection> = dets.iter().copied().filter(|d| d.class == class).collect();
    let flags = tp_flags(&own, &class_gts(gt, class), iou_t);
    let scores: Vec<f64> = own.iter().map(|d| d.score).collect();
    ap_from_flags(&scores, &flags, n_gt)
}
