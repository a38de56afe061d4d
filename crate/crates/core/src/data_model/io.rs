//! Native JSON file formats.
//!
//! Dataset files:
//! `{"format":"fuselab-dataset/1","images":[{"id","path","width","height","objects":[{"class","bbox"}]}]}`
//!
//! Detection files:
//! `{"format":"fuselab-detections/1","model","detections":[{"image_id","class","bbox","score"}],"runtime_seconds"?}`
//!
//! Keys are written in exactly that order. Floats use the shortest decimal
//! that round-trips.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{DatasetIndex, DefectClass, Detection, DetectionSet, GroundTruthObject, ImageRecord};
use crate::error::{Error, Result};
use crate::geometry::BoundingBox;

pub const DATASET_FORMAT: &str = "fuselab-dataset/1";
pub const DETECTIONS_FORMAT: &str = "fuselab-detections/1";

#[derive(Serialize, Deserialize)]
struct DatasetFile {
    format: String,
    images: Vec<ImageEntry>,
}

#[derive(Serialize, Deserialize)]
struct ImageEntry {
    id: String,
    path: String,
    width: u32,
    height: u32,
    objects: Vec<ObjectEntry>,
}

#[derive(Serialize, Deserialize)]
struct ObjectEntry {
    class: String,
    bbox: [f64; 4],
}

#[derive(Serialize, Deserialize)]
struct DetectionsFile {
    format: String,
    model: String,
    detections: Vec<DetectionEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    runtime_seconds: Option<BTreeMap<String, f64>>,
}

/// One row of a detections file. The `consensus`, `sources` and
/// `anchor_model` fields are only written for fused output; readers ignore
/// them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionEntry {
    pub image_id: String,
    pub class: String,
    pub bbox: [f64; 4],
    pub score: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub consensus: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sources: Option<Vec<SourceEntry>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anchor_model: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceEntry {
    pub model: String,
    pub score: Option<f64>,
}

fn json_error(location: &str, e: serde_json::Error) -> Error {
    use serde_json::error::Category;
    let location = format!("{location}:{}:{}", e.line(), e.column());
    match e.classify() {
        Category::Syntax | Category::Eof | Category::Io => Error::Parse {
            location,
            message: e.to_string(),
        },
        Category::Data => Error::Schema {
            location,
            message: e.to_string(),
        },
    }
}

fn check_format(location: &str, found: &str, expected: &str) -> Result<()> {
    if found == expected {
        Ok(())
    } else {
        Err(Error::Schema {
            location: location.to_string(),
            message: format!("expected format {expected:?}, found {found:?}"),
        })
    }
}

fn parse_class(location: &str, raw: &str) -> Result<DefectClass> {
    raw.parse()
        .map_err(|_| Error::validation(location, format!("unknown defect class {raw:?}")))
}

fn parse_box(location: &str, raw: [f64; 4]) -> Result<BoundingBox> {
    BoundingBox::try_from(raw).map_err(|e| match e {
        Error::Validation { message, .. } => Error::validation(location, message),
        other => other,
    })
}

/// Parses dataset JSON text; `source` names the input in error messages.
pub fn parse_dataset(text: &str, source: &str) -> Result<DatasetIndex> {
    let file: DatasetFile = serde_json::from_str(text).map_err(|e| json_error(source, e))?;
    check_format(source, &file.format, DATASET_FORMAT)?;
    let mut images = Vec::with_capacity(file.images.len());
    for entry in file.images {
        let loc = format!("{source}: image {:?}", entry.id);
        let objects = entry
            .objects
            .iter()
            .map(|o| {
                Ok(GroundTruthObject {
                    class: parse_class(&loc, &o.class)?,
                    bbox: parse_box(&loc, o.bbox)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        images.push(ImageRecord {
            id: entry.id,
            path: entry.path,
            width: entry.width,
            height: entry.height,
            objects,
        });
    }
    DatasetIndex::new(images)
}

/// Parses detections JSON text; `source` names the input in error messages.
pub fn parse_detections(text: &str, source: &str) -> Result<DetectionSet> {
    let file: DetectionsFile = serde_json::from_str(text).map_err(|e| json_error(source, e))?;
    check_format(source, &file.format, DETECTIONS_FORMAT)?;
    let detections = file
        .detections
        .into_iter()
        .enumerate()
        .map(|(i, e)| {
            let loc = format!("{source}: detection {i} (image {:?})", e.image_id);
            Ok(Detection {
                class: parse_class(&loc, &e.class)?,
                bbox: parse_box(&loc, e.bbox)?,
                score: e.score,
                image_id: e.image_id,
                model_id: file.model.clone(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    DetectionSet::new(file.model, detections, file.runtime_seconds).map_err(|e| match e {
        Error::Validation { message, .. } => Error::validation(source, message),
        other => other,
    })
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<DatasetIndex> {
    let path = path.as_ref();
    parse_dataset(&read(path)?, &path.display().to_string())
}

pub fn load_detections(path: impl AsRef<Path>) -> Result<DetectionSet> {
    let path = path.as_ref();
    parse_detections(&read(path)?, &path.display().to_string())
}

/// Writes any serializable value as pretty JSON with a trailing newline.
pub fn write_json<T: Serialize + ?Sized>(value: &T, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut text = serde_json::to_string_pretty(value).expect("in-memory JSON serialization");
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub(crate) fn dataset_to_json(index: &DatasetIndex) -> String {
    let file = DatasetFile {
        format: DATASET_FORMAT.to_string(),
        images: index
            .images()
            .iter()
            .map(|img| ImageEntry {
                id: img.id.clone(),
                path: img.path.clone(),
                width: img.width,
                height: img.height,
                objects: img
                    .objects
                    .iter()
                    .map(|o| ObjectEntry {
                        class: o.class.as_str().to_string(),
                        bbox: o.bbox.to_array(),
                    })
                    .collect(),
            })
            .collect(),
    };
    let mut text = serde_json::to_string_pretty(&file).expect("in-memory JSON serialization");
    text.push('\n');
    text
}

pub fn save_dataset(index: &DatasetIndex, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, dataset_to_json(index)).map_err(|e| Error::io(path, e))
}

pub(crate) fn detections_to_json(
    model: &str,
    entries: Vec<DetectionEntry>,
    runtime_seconds: Option<BTreeMap<String, f64>>,
) -> String {
    let file = DetectionsFile {
        format: DETECTIONS_FORMAT.to_string(),
        model: model.to_string(),
        detections: entries,
        runtime_seconds,
    };
    let mut text = serde_json::to_string_pretty(&file).expect("in-memory JSON serialization");
    text.push('\n');
    text
}

pub(crate) fn write_detection_entries(
    model: &str,
    entries: Vec<DetectionEntry>,
    runtime_seconds: Option<BTreeMap<String, f64>>,
    path: &Path,
) -> Result<()> {
    fs::write(path, detections_to_json(model, entries, runtime_seconds))
        .map_err(|e| Error::io(path, e))
}

pub fn save_detections(set: &DetectionSet, path: impl AsRef<Path>) -> Result<()> {
    let entries = set
        .detections()
        .iter()
        .map(|d| DetectionEntry {
            image_id: d.image_id.clone(),
            class: d.class.as_str().to_string(),
            bbox: d.bbox.to_array(),
            score: d.score,
            consensus: None,
            sources: None,
            anchor_model: None,
        })
        .collect();
    write_detection_entries(
        set.model_id(),
        entries,
        set.runtime_seconds().cloned(),
        path.as_ref(),
    )
}
