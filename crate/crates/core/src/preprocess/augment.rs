use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::raster::{quantize, resize, RasterImage};
use crate::data_model::GroundTruthObject;
use crate::error::{Error, Result};
use crate::geometry::BoundingBox;

/// A single augmentation step. Rotations are clockwise in multiples of 90
/// degrees so boxes stay axis-aligned.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AugmentOp {
    Rotate { angle_degrees: u16 },
    FlipHorizontal,
    FlipVertical,
    Brightness { factor: f64 },
    Rescale { factor: f64 },
}

impl AugmentOp {
    pub fn validate(&self) -> Result<()> {
        match *self {
            AugmentOp::Rotate { angle_degrees } if ![90, 180, 270].contains(&angle_degrees) => {
                Err(Error::config(format!(
                    "rotation must be 90, 180 or 270 degrees, got {angle_degrees}"
                )))
            }
            AugmentOp::Brightness { factor } | AugmentOp::Rescale { factor }
                if !(factor.is_finite() && factor > 0.0) =>
            {
                Err(Error::config(format!(
                    "augmentation factor must be finite and > 0, got {factor}"
                )))
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for AugmentOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AugmentOp::Rotate { angle_degrees } => write!(f, "rot{angle_degrees}"),
            AugmentOp::FlipHorizontal => f.write_str("flip_h"),
            AugmentOp::FlipVertical => f.write_str("flip_v"),
            AugmentOp::Brightness { factor } => write!(f, "brightness:{factor}"),
            AugmentOp::Rescale { factor } => write!(f, "rescale:{factor}"),
        }
    }
}

/// Parses the command-line spelling: `rot90`, `rot180`, `rot270`, `flip_h`,
/// `flip_v`, `brightness:F`, `rescale:F`.
impl FromStr for AugmentOp {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let factor = |raw: &str| -> Result<f64> {
            raw.parse()
                .map_err(|_| Error::config(format!("bad factor {raw:?} in augmentation {s:?}")))
        };
        let op = match s.split_once(':') {
            Some(("brightness", v)) => AugmentOp::Brightness { factor: factor(v)? },
            Some(("rescale", v)) => AugmentOp::Rescale { factor: factor(v)? },
            None => match s {
                "rot90" => AugmentOp::Rotate { angle_degrees: 90 },
                "rot180" => AugmentOp::Rotate { angle_degrees: 180 },
                "rot270" => AugmentOp::Rotate { angle_degrees: 270 },
                "flip_h" => AugmentOp::FlipHorizontal,
                "flip_v" => AugmentOp::FlipVertical,
                _ => return Err(Error::config(format!("unknown augmentation {s:?}"))),
            },
            _ => return Err(Error::config(format!("unknown augmentation {s:?}"))),
        };
        op.validate()?;
        Ok(op)
    }
}

fn rotate90(img: &RasterImage) -> RasterImage {
    let h = img.height();
    // Output (nx, ny) shows input (x = ny, y = H - 1 - nx).
    img.remap(h, img.width(), |nx, ny| (ny, h - 1 - nx))
}

fn rotate90_box(b: &BoundingBox, h: f64) -> Result<BoundingBox> {
    BoundingBox::from_corners((h - b.y_min(), b.x_min()), (h - b.y_max(), b.x_max()))
}

fn map_boxes(
    boxes: &[GroundTruthObject],
    f: impl Fn(&BoundingBox) -> Result<BoundingBox>,
) -> Result<Vec<GroundTruthObject>> {
    boxes
        .iter()
        .map(|o| {
            Ok(GroundTruthObject {
                class: o.class,
                bbox: f(&o.bbox)?,
            })
        })
        .collect()
}

/// Output size of a rescale: `ceil(dim * factor)` (ignoring float noise
/// below 1e-9), at least one pixel. Rounding up keeps every scaled box
/// inside the new frame.
pub(crate) fn rescaled_dim(dim: u32, factor: f64) -> u32 {
    ((dim as f64 * factor - 1e-9).ceil()).max(1.0) as u32
}

/// Applies `op` to the image and transforms the boxes consistently.
pub fn apply_augment(
    img: &RasterImage,
    boxes: &[GroundTruthObject],
    op: AugmentOp,
) -> Result<(RasterImage, Vec<GroundTruthObject>)> {
    op.validate()?;
    let (w, h) = (img.width(), img.height());
    let (wf, hf) = (w as f64, h as f64);
    match op {
        AugmentOp::Rotate { angle_degrees } => {
            let mut out_img = img.clone();
            let mut out_boxes = boxes.to_vec();
            for _ in 0..angle_degrees / 90 {
                let cur_h = out_img.height() as f64;
                out_boxes = map_boxes(&out_boxes, |b| rotate90_box(b, cur_h))?;
                out_img = rotate90(&out_img);
            }
            Ok((out_img, out_boxes))
        }
        AugmentOp::FlipHorizontal => Ok((
            img.remap(w, h, |x, y| (w - 1 - x, y)),
            map_boxes(boxes, |b| {
                BoundingBox::new(wf - b.x_max(), b.y_min(), wf - b.x_min(), b.y_max())
            })?,
        )),
        AugmentOp::FlipVertical => Ok((
            img.remap(w, h, |x, y| (x, h - 1 - y)),
            map_boxes(boxes, |b| {
                BoundingBox::new(b.x_min(), hf - b.y_max(), b.x_max(), hf - b.y_min())
            })?,
        )),
        AugmentOp::Brightness { factor } => Ok((
            img.map_values(|v| quantize(v as f64 * factor)),
            boxes.to_vec(),
        )),
        AugmentOp::Rescale { factor } => {
            let (nw, nh) = (rescaled_dim(w, factor), rescaled_dim(h, factor));
            let out = resize(img, nw, nh)?;
            let (nwf, nhf) = (nw as f64, nh as f64);
            let scaled = map_boxes(boxes, |b| {
                BoundingBox::new(
                    (b.x_min() * factor).min(nwf),
                    (b.y_min() * factor).min(nhf),
                    (b.x_max() * factor).min(nwf),
                    (b.y_max() * factor).min(nhf),
                )
            })?;
            Ok((out, scaled))
        }
    }
}
