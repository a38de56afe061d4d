use std::path::Path;

use image::{DynamicImage, GrayImage, RgbImage};

use crate::error::{Error, Result};

/// An 8-bit image with 1 (grayscale) or 3 (RGB) interleaved channels,
/// stored row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RasterImage {
    width: u32,
    height: u32,
    channels: u8,
    pixels: Vec<u8>,
}

impl RasterImage {
    pub fn new(width: u32, height: u32, channels: u8, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::validation(
                "raster",
                format!("empty image {width}x{height}"),
            ));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::validation(
                "raster",
                format!("unsupported channel count {channels}"),
            ));
        }
        let expected = width as usize * height as usize * channels as usize;
        if pixels.len() != expected {
            return Err(Error::validation(
                "raster",
                format!(
                    "buffer holds {} bytes, {width}x{height}x{channels} needs {expected}",
                    pixels.len()
                ),
            ));
        }
        Ok(Self {
            width,
            height,
            channels,
            pixels,
        })
    }

    pub fn filled(width: u32, height: u32, channels: u8, value: u8) -> Result<Self> {
        let n = width as usize * height as usize * channels as usize;
        Self::new(width, height, channels, vec![value; n])
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn channels(&self) -> u8 {
        self.channels
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<u8> {
        self.pixels
    }

    /// Channel value at column `x`, row `y`.
    pub fn get(&self, x: u32, y: u32, channel: u8) -> u8 {
        self.pixels[self.offset(x, y) + channel as usize]
    }

    fn offset(&self, x: u32, y: u32) -> usize {
        (y as usize * self.width as usize + x as usize) * self.channels as usize
    }

    /// Builds a new image of the given size where each output pixel copies
    /// the source pixel chosen by `source_of(x, y)`.
    pub(crate) fn remap(
        &self,
        width: u32,
        height: u32,
        source_of: impl Fn(u32, u32) -> (u32, u32),
    ) -> Self {
        let c = self.channels as usize;
        let mut pixels = Vec::with_capacity(width as usize * height as usize * c);
        for y in 0..height {
            for x in 0..width {
                let (sx, sy) = source_of(x, y);
                let o = self.offset(sx, sy);
                pixels.extend_from_slice(&self.pixels[o..o + c]);
            }
        }
        Self {
            width,
            height,
            channels: self.channels,
            pixels,
        }
    }

    pub(crate) fn map_values(&self, f: impl Fn(u8) -> u8) -> Self {
        Self {
            pixels: self.pixels.iter().map(|&v| f(v)).collect(),
            ..self.clone()
        }
    }

    /// Reads any supported format; 8-bit grayscale stays single-channel,
    /// everything else is converted to RGB (alpha dropped).
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let img = image::open(path).map_err(|e| Error::Image {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        Ok(match img {
            DynamicImage::ImageLuma8(g) => {
                let (w, h) = g.dimensions();
                Self::new(w, h, 1, g.into_raw())?
            }
            other => {
                let rgb = other.to_rgb8();
                let (w, h) = rgb.dimensions();
                Self::new(w, h, 3, rgb.into_raw())?
            }
        })
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let res = match self.channels {
            1 => GrayImage::from_raw(self.width, self.height, self.pixels.clone())
                .expect("buffer length checked at construction")
                .save_with_format(path, image::ImageFormat::Png),
            _ => RgbImage::from_raw(self.width, self.height, self.pixels.clone())
                .expect("buffer length checked at construction")
                .save_with_format(path, image::ImageFormat::Png),
        };
        res.map_err(|e| match e {
            image::ImageError::IoError(io) => Error::io(path, io),
            other => Error::Image {
                path: path.to_path_buf(),
                message: other.to_string(),
            },
        })
    }
}

/// Rounds half up and clamps into the 8-bit range.
pub(crate) fn quantize(v: f64) -> u8 {
    (v + 0.5).floor().clamp(0.0, 255.0) as u8
}

/// Luma conversion `round(0.299 R + 0.587 G + 0.114 B)`.
pub fn to_grayscale(img: &RasterImage) -> Result<RasterImage> {
    if img.channels != 3 {
        return Err(Error::validation(
            "grayscale conversion",
            format!("expected 3 channels, got {}", img.channels),
        ));
    }
    let pixels = img
        .pixels
        .chunks_exact(3)
        .map(|p| quantize(0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64))
        .collect();
    RasterImage::new(img.width, img.height, 1, pixels)
}

/// Bilinear resize with corner-aligned sampling: output corners coincide
/// with input corners, so a same-size resize is the identity.
pub fn resize(img: &RasterImage, target_w: u32, target_h: u32) -> Result<RasterImage> {
    if target_w == 0 || target_h == 0 {
        return Err(Error::config(format!(
            "resize target must be positive, got {target_w}x{target_h}"
        )));
    }
    if (target_w, target_h) == (img.width, img.height) {
        return Ok(img.clone());
    }
    let sample_positions = |src: u32, dst: u32| -> Vec<(usize, usize, f64)> {
        (0..dst)
            .map(|i| {
                let pos = if dst == 1 {
                    (src - 1) as f64 / 2.0
                } else {
                    i as f64 * (src - 1) as f64 / (dst - 1) as f64
                };
                let lo = (pos.floor() as usize).min(src as usize - 1);
                let hi = (lo + 1).min(src as usize - 1);
                (lo, hi, pos - lo as f64)
            })
            .collect()
    };
    let xs = sample_positions(img.width, target_w);
    let ys = sample_positions(img.height, target_h);
    let c = img.channels as usize;
    let row = img.width as usize * c;
    let mut pixels = Vec::with_capacity(target_w as usize * target_h as usize * c);
    for &(y0, y1, fy) in &ys {
        for &(x0, x1, fx) in &xs {
            for ch in 0..c {
                let p = |x: usize, y: usize| img.pixels[y * row + x * c + ch] as f64;
                let top = p(x0, y0) * (1.0 - fx) + p(x1, y0) * fx;
                let bottom = p(x0, y1) * (1.0 - fx) + p(x1, y1) * fx;
                pixels.push(quantize(top * (1.0 - fy) + bottom * fy));
            }
        }
    }
    RasterImage::new(target_w, target_h, img.channels, pixels)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rgb(p: [u8; 3]) -> RasterImage {
        RasterImage::new(1, 1, 3, p.to_vec()).unwrap()
    }

    #[test]
    fn grayscale_examples() {
        assert_eq!(
            to_grayscale(&rgb([255, 255, 255])).unwrap().pixels(),
            &[255]
        );
        assert_eq!(to_grayscale(&rgb([0, 0, 0])).unwrap().pixels(), &[0]);
        assert_eq!(to_grayscale(&rgb([255, 0, 0])).unwrap().pixels(), &[76]);
        let gray = RasterImage::filled(2, 2, 1, 9).unwrap();
        assert!(to_grayscale(&gray).is_err());
    }

    #[test]
    fn resize_examples() {
        let img = RasterImage::new(3, 2, 1, vec![1, 2, 3, 4, 5, 6]).unwrap();
        assert_eq!(resize(&img, 3, 2).unwrap(), img);

        let one = RasterImage::filled(1, 1, 1, 200).unwrap();
        let big = resize(&one, 7, 5).unwrap();
        assert_eq!((big.width(), big.height()), (7, 5));
        assert!(big.pixels().iter().all(|&v| v == 200));

        let ramp = RasterImage::new(2, 1, 1, vec![0, 255]).unwrap();
        let out = resize(&ramp, 4, 1).unwrap();
        // Samples at 0, 1/3, 2/3, 1 of the way across.
        assert_eq!(out.pixels(), &[0, 85, 170, 255]);

        assert!(resize(&img, 0, 4).is_err());
    }

    #[test]
    fn buffer_length_is_checked() {
        assert!(RasterImage::new(2, 2, 1, vec![0; 3]).is_err());
        assert!(RasterImage::new(2, 2, 2, vec![0; 8]).is_err());
    }

    #[test]
    fn png_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        for c in [1u8, 3] {
            let n = 5 * 4 * c as usize;
            let img =
                RasterImage::new(5, 4, c, (0..n).map(|i| (i * 7 % 256) as u8).collect()).unwrap();
            let p = dir.path().join(format!("x{c}.png"));
            img.save_png(&p).unwrap();
            assert_eq!(RasterImage::load(&p).unwrap(), img);
        }
    }
}
