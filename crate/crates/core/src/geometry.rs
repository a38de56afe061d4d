//! Axis-aligned box arithmetic.
//!
//! Boxes use continuous corner coordinates: origin at the top-left, x to the
//! right, y downward, and area `(x_max - x_min) * (y_max - y_min)`.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An axis-aligned rectangle in pixel coordinates.
///
/// Always satisfies `x_min < x_max`, `y_min < y_max` with finite coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct BoundingBox {
    x_min: f64,
    y_min: f64,
    x_max: f64,
    y_max: f64,
}

impl BoundingBox {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Result<Self> {
        let coords = [x_min, y_min, x_max, y_max];
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::validation(
                "bounding box",
                format!("non-finite coordinate in {coords:?}"),
            ));
        }
        if !(x_min < x_max && y_min < y_max) {
            return Err(Error::validation(
                "bounding box",
                format!("degenerate box {coords:?}: need x_min < x_max and y_min < y_max"),
            ));
        }
        Ok(Self {
            x_min,
            y_min,
            x_max,
            y_max,
        })
    }

    /// Builds a box from two arbitrary corners, reordering them as needed.
    pub fn from_corners(a: (f64, f64), b: (f64, f64)) -> Result<Self> {
        Self::new(a.0.min(b.0), a.1.min(b.1), a.0.max(b.0), a.1.max(b.1))
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn y_min(&self) -> f64 {
        self.y_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn y_max(&self) -> f64 {
        self.y_max
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.x_min, self.y_min, self.x_max, self.y_max]
    }

    /// Area of the overlap with `other`; zero when the boxes only touch.
    pub fn intersection_area(&self, other: &BoundingBox) -> f64 {
        let w = self.x_max.min(other.x_max) - self.x_min.max(other.x_min);
        let h = self.y_max.min(other.y_max) - self.y_min.max(other.y_min);
        if w <= 0.0 || h <= 0.0 {
            0.0
        } else {
            w * h
        }
    }

    pub fn iou(&self, other: &BoundingBox) -> f64 {
        iou(self, other)
    }

    /// True when the box lies inside `[0, width] x [0, height]`.
    pub fn within(&self, width: f64, height: f64) -> bool {
        self.x_min >= 0.0 && self.y_min >= 0.0 && self.x_max <= width && self.y_max <= height
    }
}

impl TryFrom<[f64; 4]> for BoundingBox {
    type Error = Error;

    fn try_from(c: [f64; 4]) -> Result<Self> {
        BoundingBox::new(c[0], c[1], c[2], c[3])
    }
}

impl From<BoundingBox> for [f64; 4] {
    fn from(b: BoundingBox) -> Self {
        b.to_array()
    }
}

pub fn area(b: &BoundingBox) -> f64 {
    b.area()
}

/// Intersection over union. Symmetric, exactly 1 for identical boxes and
/// exactly 0 for disjoint ones.
pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let inter = a.intersection_area(b);
    if inter == 0.0 {
        return 0.0;
    }
    let union = a.area() + b.area() - inter;
    (inter / union).clamp(0.0, 1.0)
}

/// Greedy non-maximum suppression returning indices of retained entries.
///
/// Candidates are visited in descending score order (ties: smaller `x_min`,
/// then smaller `y_min`, then input index). A candidate is dropped iff its
/// IoU with an already retained box is `>= iou_threshold` and, when
/// `class_aware`, both carry the same class. Indices are returned in
/// retention order.
pub fn nms_indices<C: PartialEq>(
    candidates: &[(BoundingBox, f64, C)],
    iou_threshold: f64,
    class_aware: bool,
) -> Result<Vec<usize>> {
    if !(iou_threshold > 0.0 && iou_threshold <= 1.0) {
        return Err(Error::config(format!(
            "NMS IoU threshold must lie in (0, 1], got {iou_threshold}"
        )));
    }
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    order.sort_by(|&i, &j| {
        let (bi, si, _) = &candidates[i];
        let (bj, sj, _) = &candidates[j];
        sj.total_cmp(si)
            .then(bi.x_min.total_cmp(&bj.x_min))
            .then(bi.y_min.total_cmp(&bj.y_min))
            .then(i.cmp(&j))
    });

    let mut kept: Vec<usize> = Vec::new();
    for i in order {
        let (bi, _, ci) = &candidates[i];
        let suppressed = kept.iter().any(|&k| {
            let (bk, _, ck) = &candidates[k];
            (!class_aware || ci == ck) && iou(bi, bk) >= iou_threshold
        });
        if !suppressed {
            kept.push(i);
        }
    }
    Ok(kept)
}

/// [`nms_indices`] returning the retained entries themselves.
pub fn nms<C: PartialEq + Clone>(
    candidates: &[(BoundingBox, f64, C)],
    iou_threshold: f64,
    class_aware: bool,
) -> Result<Vec<(BoundingBox, f64, C)>> {
    Ok(nms_indices(candidates, iou_threshold, class_aware)?
        .into_iter()
        .map(|i| candidates[i].clone())
        .collect())
}

/// Ordering used wherever detections are ranked: descending score, then
/// ascending `x_min`. Callers append their own final tie-break.
pub(crate) fn rank_order(
    score_a: f64,
    box_a: &BoundingBox,
    score_b: f64,
    box_b: &BoundingBox,
) -> Ordering {
    score_b
        .total_cmp(&score_a)
        .then(box_a.x_min.total_cmp(&box_b.x_min))
}
