//! Slow, obviously-correct reference implementations used to check the
//! library. None of them call into the code they check.

#![allow(dead_code)]

/// IoU of two integer boxes `[x0, y0, x1, y1)` by counting grid cells.
pub fn raster_iou(a: [i64; 4], b: [i64; 4]) -> f64 {
    let inside = |r: [i64; 4], x: i64, y: i64| x >= r[0] && x < r[2] && y >= r[1] && y < r[3];
    let (lo_x, hi_x) = (a[0].min(b[0]), a[2].max(b[2]));
    let (lo_y, hi_y) = (a[1].min(b[1]), a[3].max(b[3]));
    let (mut inter, mut union) = (0u64, 0u64);
    for y in lo_y..hi_y {
        for x in lo_x..hi_x {
            let (ia, ib) = (inside(a, x, y), inside(b, x, y));
            inter += (ia && ib) as u64;
            union += (ia || ib) as u64;
        }
    }
    inter as f64 / union as f64
}

/// One detection for the AP oracle: image index, box, score.
#[derive(Debug, Clone, Copy)]
pub struct OracleDet {
    pub image: usize,
    pub bbox: [f64; 4],
    pub score: f64,
}

fn box_iou(a: [f64; 4], b: [f64; 4]) -> f64 {
    let iw = (a[2].min(b[2]) - a[0].max(b[0])).max(0.0);
    let ih = (a[3].min(b[3]) - a[1].max(b[1])).max(0.0);
    let inter = iw * ih;
    let area = |r: [f64; 4]| (r[2] - r[0]) * (r[3] - r[1]);
    inter / (area(a) + area(b) - inter)
}

/// True positives among `kept` (indices into `dets`): each detection, in
/// order of descending score, then smaller x_min, then position, claims the
/// unclaimed ground truth of its image with the best IoU `>= iou_t`, earlier
/// ground truth winning ties.
fn greedy_tp(dets: &[OracleDet], kept: &[usize], gts: &[Vec<[f64; 4]>], iou_t: f64) -> usize {
    let mut order = kept.to_vec();
    order.sort_by(|&i, &j| {
        dets[j]
            .score
            .partial_cmp(&dets[i].score)
            .unwrap()
            .then(dets[i].bbox[0].partial_cmp(&dets[j].bbox[0]).unwrap())
            .then(i.cmp(&j))
    });
    let mut claimed: Vec<Vec<bool>> = gts.iter().map(|g| vec![false; g.len()]).collect();
    let mut tp = 0;
    for i in order {
        let d = dets[i];
        let mut best: Option<(usize, f64)> = None;
        for (g, &gb) in gts[d.image].iter().enumerate() {
            let v = box_iou(d.bbox, gb);
            if !claimed[d.image][g] && v >= iou_t && best.is_none_or(|(_, b)| v > b) {
                best = Some((g, v));
            }
        }
        if let Some((g, _)) = best {
            claimed[d.image][g] = true;
            tp += 1;
        }
    }
    tp
}

/// All-points AP by enumerating every score cutoff: each cutoff keeps the
/// detections scoring at least that much and is rematched from scratch.
/// The precision envelope at recall `r` is the best precision over cutoffs
/// reaching recall `>= r`, integrated exactly over the recall steps.
pub fn brute_force_ap(dets: &[OracleDet], gts: &[Vec<[f64; 4]>], iou_t: f64) -> Option<f64> {
    let n_gt: usize = gts.iter().map(Vec::len).sum();
    if n_gt == 0 {
        return None;
    }
    let mut cutoffs: Vec<f64> = dets.iter().map(|d| d.score).collect();
    cutoffs.sort_by(|a, b| b.partial_cmp(a).unwrap());
    cutoffs.dedup();
    let points: Vec<(f64, f64)> = cutoffs
        .iter()
        .map(|&c| {
            let kept: Vec<usize> = (0..dets.len()).filter(|&i| dets[i].score >= c).collect();
            let tp = greedy_tp(dets, &kept, gts, iou_t) as f64;
            (tp / n_gt as f64, tp / kept.len() as f64)
        })
        .collect();
    let mut recalls: Vec<f64> = points.iter().map(|p| p.0).collect();
    recalls.sort_by(|a, b| a.partial_cmp(b).unwrap());
    recalls.dedup();
    let mut ap = 0.0;
    let mut prev = 0.0;
    for r in recalls {
        let envelope = points
            .iter()
            .filter(|p| p.0 >= r)
            .map(|p| p.1)
            .fold(0.0, f64::max);
        ap += (r - prev) * envelope;
        prev = r;
    }
    Some(ap)
}

/// Otsu threshold by trying all 256 cuts and comparing between-class
/// variance exactly in integers. `None` when the image has a single value.
pub fn exhaustive_otsu(pixels: &[u8]) -> Option<u8> {
    let n = pixels.len() as u128;
    let total: u128 = pixels.iter().map(|&v| v as u128).sum();
    // Between-class variance at cut t is proportional to
    // (n * sum0 - n0 * total)^2 / (n0 * n1).
    let mut best: Option<(u8, u128, u128)> = None;
    for t in 0..=255u8 {
        let n0 = pixels.iter().filter(|&&v| v <= t).count() as u128;
        let n1 = n - n0;
        if n0 == 0 || n1 == 0 {
            continue;
        }
        let sum0: u128 = pixels.iter().filter(|&&v| v <= t).map(|&v| v as u128).sum();
        let diff = (n * sum0).abs_diff(n0 * total);
        let num = diff * diff;
        let den = n0 * n1;
        let better = match best {
            None => true,
            Some((_, bn, bd)) => num * bd > bn * den,
        };
        if better {
            best = Some((t, num, den));
        }
    }
    best.map(|(t, _, _)| t)
}
