//! Import of YOLO-style text labels (as written by OpenLabeling and most
//! annotation tools): one `.txt` per image, one
//! `class_index x_center y_center width height` line per object, all
//! coordinates normalized to `[0, 1]`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use super::{DatasetIndex, DefectClass, GroundTruthObject, ImageRecord};
use crate::error::{Error, Result};
use crate::geometry::BoundingBox;

const IMAGE_EXTENSIONS: [&str; 4] = ["png", "jpg", "jpeg", "bmp"];

/// Parses the contents of one label file for an image of the given size.
///
/// Blank lines are skipped. Boxes reaching past the frame (possible when a
/// normalized centre sits near an edge) are clipped to it.
pub(crate) fn parse_yolo_labels(
    text: &str,
    width: u32,
    height: u32,
    class_map: &[DefectClass],
    source: &str,
) -> Result<Vec<GroundTruthObject>> {
    let (w, h) = (width as f64, height as f64);
    let mut objects = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let loc = || format!("{source}:{}", lineno + 1);
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        if fields.len() != 5 {
            return Err(Error::Parse {
                location: loc(),
                message: format!("expected 5 fields, found {}", fields.len()),
            });
        }
        let class_index: usize = fields[0].parse().map_err(|_| Error::Parse {
            location: loc(),
            message: format!("class index {:?} is not a non-negative integer", fields[0]),
        })?;
        let class = *class_map.get(class_index).ok_or_else(|| {
            Error::validation(
                loc(),
                format!(
                    "class index {class_index} outside class map of {} entries",
                    class_map.len()
                ),
            )
        })?;
        let mut v = [0.0f64; 4];
        for (slot, raw) in v.iter_mut().zip(&fields[1..]) {
            *slot = raw.parse().map_err(|_| Error::Parse {
                location: loc(),
                message: format!("{raw:?} is not a number"),
            })?;
            if !(0.0..=1.0).contains(slot) {
                return Err(Error::validation(
                    loc(),
                    format!("normalized value {raw} outside [0, 1]"),
                ));
            }
        }
        let [xc, yc, bw, bh] = v;
        let x_min = ((xc - bw / 2.0) * w).max(0.0);
        let y_min = ((yc - bh / 2.0) * h).max(0.0);
        let x_max = ((xc + bw / 2.0) * w).min(w);
        let y_max = ((yc + bh / 2.0) * h).min(h);
        let bbox = BoundingBox::new(x_min, y_min, x_max, y_max)
            .map_err(|_| Error::validation(loc(), "box has zero area"))?;
        objects.push(GroundTruthObject { class, bbox });
    }
    Ok(objects)
}

fn list_dir(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let p = entry.path();
        if p.is_file() {
            out.push(p);
        }
    }
    out.sort();
    Ok(out)
}

fn has_extension(p: &Path, exts: &[&str]) -> bool {
    p.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| exts.iter().any(|x| x.eq_ignore_ascii_case(e)))
}

fn stem(p: &Path) -> String {
    p.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

/// Builds a dataset from an image directory and a matching label directory.
///
/// Images without a label file are treated as defect-free. A label file
/// without a matching image is an error.
pub fn import_yolo_txt(
    image_dir: impl AsRef<Path>,
    label_dir: impl AsRef<Path>,
    class_map: &[DefectClass],
) -> Result<DatasetIndex> {
    let image_dir = image_dir.as_ref();
    let label_dir = label_dir.as_ref();

    let mut images: BTreeMap<String, PathBuf> = BTreeMap::new();
    for p in list_dir(image_dir)?
        .into_iter()
        .filter(|p| has_extension(p, &IMAGE_EXTENSIONS))
    {
        let id = stem(&p);
        if let Some(prev) = images.insert(id.clone(), p.clone()) {
            return Err(Error::validation(
                format!("image {id:?}"),
                format!(
                    "ambiguous image files {} and {}",
                    prev.display(),
                    p.display()
                ),
            ));
        }
    }

    let mut labels: BTreeMap<String, PathBuf> = BTreeMap::new();
    for p in list_dir(label_dir)?
        .into_iter()
        .filter(|p| has_extension(p, &["txt"]))
    {
        let id = stem(&p);
        if !images.contains_key(&id) {
            return Err(Error::validation(
                p.display().to_string(),
                format!("no image named {id:?} in {}", image_dir.display()),
            ));
        }
        labels.insert(id, p);
    }

    let mut records = Vec::with_capacity(images.len());
    for (id, path) in images {
        let (width, height) = image::image_dimensions(&path).map_err(|e| Error::Image {
            path: path.clone(),
            message: e.to_string(),
        })?;
        let objects = match labels.get(&id) {
            Some(lp) => {
                let text = fs::read_to_string(lp).map_err(|e| Error::io(lp, e))?;
                parse_yolo_labels(&text, width, height, class_map, &lp.display().to_string())?
            }
            None => Vec::new(),
        };
        records.push(ImageRecord {
            id,
            path: path.display().to_string(),
            width,
            height,
            objects,
        });
    }
    DatasetIndex::new(records)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map() -> Vec<DefectClass> {
        DefectClass::ALL.to_vec()
    }

    fn close(a: [f64; 4], b: [f64; 4]) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-9)
    }

    #[test]
    fn full_frame_box() {
        let objs = parse_yolo_labels("0 0.5 0.5 1.0 1.0\n", 600, 600, &map(), "l").unwrap();
        assert_eq!(objs[0].class, DefectClass::MissingHole);
        assert_eq!(objs[0].bbox.to_array(), [0.0, 0.0, 600.0, 600.0]);
    }

    #[test]
    fn centre_size_converts_to_corners() {
        let objs = parse_yolo_labels("3 0.25 0.5 0.1 0.2", 600, 600, &map(), "l").unwrap();
        assert_eq!(objs[0].class, DefectClass::Short);
        assert!(close(objs[0].bbox.to_array(), [120.0, 240.0, 180.0, 360.0]));
    }

    #[test]
    fn malformed_lines_report_line_numbers() {
        match parse_yolo_labels("0 0.5 0.5 1 1\n0 0.5 0.5 1.0", 600, 600, &map(), "l.txt") {
            Err(Error::Parse { location, .. }) => assert_eq!(location, "l.txt:2"),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            parse_yolo_labels("9 0.5 0.5 0.1 0.1", 600, 600, &map(), "l"),
            Err(Error::Validation { .. })
        ));
        assert!(matches!(
            parse_yolo_labels("1 1.5 0.5 0.1 0.1", 600, 600, &map(), "l"),
            Err(Error::Validation { .. })
        ));
    }

    #[test]
    fn imports_directory_pair() {
        let dir = tempfile::tempdir().unwrap();
        let imgs = dir.path().join("images");
        let lbls = dir.path().join("labels");
        fs::create_dir_all(&imgs).unwrap();
        fs::create_dir_all(&lbls).unwrap();
        image::GrayImage::new(40, 20)
            .save(imgs.join("a.png"))
            .unwrap();
        image::GrayImage::new(10, 10)
            .save(imgs.join("clean.png"))
            .unwrap();
        fs::write(lbls.join("a.txt"), "4 0.5 0.5 0.5 0.5\n").unwrap();

        let idx = import_yolo_txt(&imgs, &lbls, &map()).unwrap();
        assert_eq!(idx.len(), 2);
        let a = idx.get("a").unwrap();
        assert_eq!((a.width, a.height), (40, 20));
        assert_eq!(a.objects[0].bbox.to_array(), [10.0, 5.0, 30.0, 15.0]);
        assert!(idx.get("clean").unwrap().objects.is_empty());

        fs::write(lbls.join("orphan.txt"), "0 0.5 0.5 0.1 0.1\n").unwrap();
        assert!(matches!(
            import_yolo_txt(&imgs, &lbls, &map()),
            Err(Error::Validation { .. })
        ));
    }
}
