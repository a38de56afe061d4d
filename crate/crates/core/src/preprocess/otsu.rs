use std::cmp::Ordering;

use super::raster::RasterImage;
use crate::error::{Error, Result};

/// Between-class variance of a threshold, kept as the exact fraction
/// `diff^2 / (n_low * n_high)`, which is proportional to the variance with
/// the same positive constant for every threshold of one image.
#[derive(Clone, Copy)]
struct Separation {
    diff: u128,
    denom: u128,
}

impl Separation {
    fn is_zero(&self) -> bool {
        self.diff == 0
    }

    fn cmp(&self, other: &Separation) -> Ordering {
        let lhs = self
            .diff
            .checked_mul(self.diff)
            .and_then(|sq| sq.checked_mul(other.denom));
        let rhs = other
            .diff
            .checked_mul(other.diff)
            .and_then(|sq| sq.checked_mul(self.denom));
        match (lhs, rhs) {
            (Some(l), Some(r)) => l.cmp(&r),
            // Only reachable for very large images; f64 is ample there.
            _ => {
                let l = (self.diff as f64).powi(2) / self.denom as f64;
                let r = (other.diff as f64).powi(2) / other.denom as f64;
                l.total_cmp(&r)
            }
        }
    }
}

pub(crate) fn histogram(img: &RasterImage) -> [u64; 256] {
    let mut hist = [0u64; 256];
    for &v in img.pixels() {
        hist[v as usize] += 1;
    }
    hist
}

/// Otsu threshold over the 256-bin histogram: the `t` maximizing
/// between-class variance when splitting at `value <= t`. Ties go to the
/// smallest `t`. Returns `None` when no threshold separates two non-empty
/// classes (a single-valued image).
pub fn otsu_threshold(img: &RasterImage) -> Option<u8> {
    let hist = histogram(img);
    let total: u128 = hist.iter().map(|&h| h as u128).sum();
    let total_sum: u128 = hist
        .iter()
        .enumerate()
        .map(|(v, &h)| v as u128 * h as u128)
        .sum();

    let mut best: Option<(u8, Separation)> = None;
    let (mut n_low, mut sum_low) = (0u128, 0u128);
    for t in 0..=255u8 {
        n_low += hist[t as usize] as u128;
        sum_low += t as u128 * hist[t as usize] as u128;
        let n_high = total - n_low;
        if n_low == 0 || n_high == 0 {
            continue;
        }
        // sum_low * N - S * n_low; sign is irrelevant once squared.
        let a = sum_low * total;
        let b = total_sum * n_low;
        let sep = Separation {
            diff: a.abs_diff(b),
            denom: n_low * n_high,
        };
        match &best {
            Some((_, cur)) if sep.cmp(cur) != Ordering::Greater => {}
            _ => best = Some((t, sep)),
        }
    }
    best.filter(|(_, s)| !s.is_zero()).map(|(t, _)| t)
}

/// Binarizes a grayscale image with Otsu's threshold: values above the
/// threshold become 255, the rest 0. A single-valued image maps to all 0.
pub fn binarize_otsu(img: &RasterImage) -> Result<RasterImage> {
    if img.channels() != 1 {
        return Err(Error::validation(
            "binarization",
            format!(
                "expected a grayscale image, got {} channels",
                img.channels()
            ),
        ));
    }
    Ok(match otsu_threshold(img) {
        Some(t) => img.map_values(|v| if v > t { 255 } else { 0 }),
        None => img.map_values(|_| 0),
    })
}
