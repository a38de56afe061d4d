//! Annotated PNGs for eyeballing results: ground truth in white, detections
//! in a per-class colour with a `class score` label.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::data_model::{DatasetIndex, DefectClass, Detection, GroundTruthObject};
use crate::error::{Error, Result};
use crate::geometry::BoundingBox;
use crate::par;
use crate::preprocess::{file_stems, resolve_image_path, RasterImage};

const PALETTE: [[u8; 3]; DefectClass::COUNT] = [
    [230, 25, 75],
    [60, 180, 75],
    [255, 225, 25],
    [0, 130, 200],
    [245, 130, 48],
    [145, 30, 180],
    [70, 240, 240],
    [240, 50, 230],
];

const WHITE: [u8; 3] = [255, 255, 255];
const SHADE: [u8; 3] = [0, 0, 0];
const GLYPH_W: i64 = 3;
const GLYPH_H: i64 = 5;
const SCALE: i64 = 2;

/// 3x5 glyphs as five space-separated rows, top to bottom. Letters are
/// rendered upper-case.
fn glyph(c: char) -> &'static str {
    match c.to_ascii_uppercase() {
        'A' => ".#. #.# ### #.# #.#",
        'B' => "##. #.# ##. #.# ##.",
        'C' => ".## #.. #.. #.. .##",
        'D' => "##. #.# #.# #.# ##.",
        'E' => "### #.. ##. #.. ###",
        'F' => "### #.. ##. #.. #..",
        'G' => ".## #.. #.# #.# .##",
        'H' => "#.# #.# ### #.# #.#",
        'I' => "### .#. .#. .#. ###",
        'J' => "..# ..# ..# #.# .#.",
        'K' => "#.# #.# ##. #.# #.#",
        'L' => "#.. #.. #.. #.. ###",
        'M' => "#.# ### ### #.# #.#",
        'N' => "##. #.# #.# #.# #.#",
        'O' => ".#. #.# #.# #.# .#.",
        'P' => "##. #.# ##. #.. #..",
        'Q' => ".#. #.# #.# ##. .##",
        'R' => "##. #.# ##. #.# #.#",
        'S' => ".## #.. .#. ..# ##.",
        'T' => "### .#. .#. .#. .#.",
        'U' => "#.# #.# #.# #.# ###",
        'V' => "#.# #.# #.# #.# .#.",
        'W' => "#.# #.# ### ### #.#",
        'X' => "#.# #.# .#. #.# #.#",
        'Y' => "#.# #.# .#. .#. .#.",
        'Z' => "### ..# .#. #.. ###",
        '0' => "### #.# #.# #.# ###",
        '1' => ".#. ##. .#. .#. ###",
        '2' => "##. ..# .#. #.. ###",
        '3' => "##. ..# .#. ..# ##.",
        '4' => "#.# #.# ### ..# ..#",
        '5' => "### #.. ##. ..# ##.",
        '6' => ".## #.. ### #.# ###",
        '7' => "### ..# .#. .#. .#.",
        '8' => "### #.# ### #.# ###",
        '9' => "### #.# ### ..# ##.",
        '.' => "... ... ... ... .#.",
        '_' => "... ... ... ... ###",
        '-' => "... ... ### ... ...",
        _ => "... ... ... ... ...",
    }
}

struct Canvas {
    width: i64,
    height: i64,
    rgb: Vec<u8>,
}

impl Canvas {
    fn from_image(img: &RasterImage) -> Self {
        let rgb = match img.channels() {
            1 => img.pixels().iter().flat_map(|&v| [v, v, v]).collect(),
            _ => img.pixels().to_vec(),
        };
        Self {
            width: img.width() as i64,
            height: img.height() as i64,
            rgb,
        }
    }

    fn put(&mut self, x: i64, y: i64, c: [u8; 3]) {
        if (0..self.width).contains(&x) && (0..self.height).contains(&y) {
            let i = ((y * self.width + x) * 3) as usize;
            self.rgb[i..i + 3].copy_from_slice(&c);
        }
    }

    fn fill(&mut self, x0: i64, y0: i64, x1: i64, y1: i64, c: [u8; 3]) {
        for y in y0..y1 {
            for x in x0..x1 {
                self.put(x, y, c);
            }
        }
    }

    fn rect(&mut self, b: [i64; 4], thickness: i64, c: [u8; 3]) {
        let [x0, y0, x1, y1] = b;
        self.fill(x0, y0, x1 + 1, y0 + thickness, c);
        self.fill(x0, y1 + 1 - thickness, x1 + 1, y1 + 1, c);
        self.fill(x0, y0, x0 + thickness, y1 + 1, c);
        self.fill(x1 + 1 - thickness, y0, x1 + 1, y1 + 1, c);
    }

    fn text(&mut self, x: i64, y: i64, s: &str, c: [u8; 3]) {
        let advance = (GLYPH_W + 1) * SCALE;
        let w = advance * s.chars().count() as i64;
        self.fill(x - 1, y - 1, x + w, y + GLYPH_H * SCALE + 1, SHADE);
        for (k, ch) in s.chars().enumerate() {
            let ox = x + k as i64 * advance;
            for (bit, px) in glyph(ch).bytes().filter(|b| *b != b' ').enumerate() {
                if px == b'#' {
                    let (gx, gy) = (bit as i64 % GLYPH_W, bit as i64 / GLYPH_W);
                    self.fill(
                        ox + gx * SCALE,
                        y + gy * SCALE,
                        ox + (gx + 1) * SCALE,
                        y + (gy + 1) * SCALE,
                        c,
                    );
                }
            }
        }
    }

    fn into_image(self) -> Result<RasterImage> {
        RasterImage::new(self.width as u32, self.height as u32, 3, self.rgb)
    }
}

/// Maps a box from record coordinates to pixel indices of the image.
fn pixel_box(b: &BoundingBox, sx: f64, sy: f64) -> [i64; 4] {
    [
        (b.x_min() * sx).floor() as i64,
        (b.y_min() * sy).floor() as i64,
        ((b.x_max() * sx).ceil() as i64 - 1).max((b.x_min() * sx).floor() as i64),
        ((b.y_max() * sy).ceil() as i64 - 1).max((b.y_min() * sy).floor() as i64),
    ]
}

/// Draws ground truth and detections onto a copy of `img` (RGB output).
/// Box coordinates are in a `record_w x record_h` frame and are scaled to
/// the image's pixel size.
pub fn draw_overlay(
    img: &RasterImage,
    record_w: u32,
    record_h: u32,
    gts: &[GroundTruthObject],
    dets: &[&Detection],
) -> Result<RasterImage> {
    let mut canvas = Canvas::from_image(img);
    let sx = img.width() as f64 / record_w as f64;
    let sy = img.height() as f64 / record_h as f64;
    for g in gts {
        canvas.rect(pixel_box(&g.bbox, sx, sy), 1, WHITE);
    }
    for d in dets {
        canvas.rect(pixel_box(&d.bbox, sx, sy), 2, PALETTE[d.class.index()]);
    }
    for d in dets {
        let [x0, y0, _, _] = pixel_box(&d.bbox, sx, sy);
        let label_h = GLYPH_H * SCALE + 2;
        let y = if y0 >= label_h {
            y0 - label_h + 1
        } else {
            y0 + 3
        };
        let label = format!("{} {:.2}", d.class.as_str(), d.score);
        canvas.text(x0 + 1, y, &label, PALETTE[d.class.index()]);
    }
    canvas.into_image()
}

/// Writes one annotated PNG per image of `gt` into `out_dir`, named after
/// the image id. Source images are resolved against `base_dir`.
pub fn render_overlays(
    gt: &DatasetIndex,
    base_dir: Option<&Path>,
    dets: &[&Detection],
    out_dir: &Path,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut by_image: HashMap<&str, Vec<&Detection>> = HashMap::new();
    for d in dets {
        by_image.entry(d.image_id.as_str()).or_default().push(d);
    }
    let stems = file_stems(gt.images().iter().map(|i| i.id.as_str()));
    let jobs: Vec<(usize, &str)> = stems.iter().map(String::as_str).enumerate().collect();
    par::map(&jobs, |&(i, stem)| {
        let record = &gt.images()[i];
        let img = RasterImage::load(resolve_image_path(base_dir, &record.path))?;
        let own = by_image
            .get(record.id.as_str())
            .map_or(&[][..], |v| v.as_slice());
        let out = draw_overlay(&img, record.width, record.height, &record.objects, own)?;
        let path = out_dir.join(format!("{stem}.png"));
        out.save_png(&path)?;
        Ok(path)
    })
    .into_iter()
    .collect()
}
