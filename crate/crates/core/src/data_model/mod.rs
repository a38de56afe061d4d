//! Canonical records for images, ground truth and detections.

mod class;
mod io;
mod yolo;

use std::collections::{BTreeMap, HashSet};

pub use class::{normalize_class_name, ClassCounts, DefectClass};
pub(crate) use io::write_detection_entries;
pub use io::{
    load_dataset, load_detections, parse_dataset, parse_detections, save_dataset, save_detections,
    write_json, DetectionEntry, SourceEntry, DATASET_FORMAT, DETECTIONS_FORMAT,
};
pub use yolo::import_yolo_txt;

use crate::error::{Error, Result};
use crate::geometry::BoundingBox;

/// One labelled defect instance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundTruthObject {
    pub class: DefectClass,
    pub bbox: BoundingBox,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageRecord {
    pub id: String,
    pub path: String,
    pub width: u32,
    pub height: u32,
    /// Empty for defect-free boards.
    pub objects: Vec<GroundTruthObject>,
}

impl ImageRecord {
    fn validate(&self) -> Result<()> {
        let loc = || format!("image {:?}", self.id);
        if self.width == 0 || self.height == 0 {
            return Err(Error::validation(
                loc(),
                format!(
                    "dimensions must be positive, got {}x{}",
                    self.width, self.height
                ),
            ));
        }
        for (i, obj) in self.objects.iter().enumerate() {
            if !obj.bbox.within(self.width as f64, self.height as f64) {
                return Err(Error::validation(
                    loc(),
                    format!(
                        "object {i} box {:?} exceeds image bounds {}x{}",
                        obj.bbox.to_array(),
                        self.width,
                        self.height
                    ),
                ));
            }
        }
        Ok(())
    }
}

/// A validated collection of images with derived per-class counts.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DatasetIndex {
    images: Vec<ImageRecord>,
    class_counts: ClassCounts,
}

impl DatasetIndex {
    /// Validates ids, dimensions and box bounds, then derives class counts.
    pub fn new(images: Vec<ImageRecord>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(images.len());
        for img in &images {
            if !seen.insert(img.id.as_str()) {
                return Err(Error::validation(
                    format!("image {:?}", img.id),
                    "duplicate image id",
                ));
            }
            img.validate()?;
        }
        let class_counts = count_classes(&images);
        Ok(Self {
            images,
            class_counts,
        })
    }

    pub fn images(&self) -> &[ImageRecord] {
        &self.images
    }

    pub fn into_images(self) -> Vec<ImageRecord> {
        self.images
    }

    pub fn class_counts(&self) -> &ClassCounts {
        &self.class_counts
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&ImageRecord> {
        self.images.iter().find(|i| i.id == id)
    }

    /// Classes with at least one ground-truth instance, canonical order.
    pub fn present_classes(&self) -> Vec<DefectClass> {
        self.class_counts
            .iter()
            .filter(|&(_, n)| n > 0)
            .map(|(c, _)| c)
            .collect()
    }
}

fn count_classes(images: &[ImageRecord]) -> ClassCounts {
    let mut counts = ClassCounts::default();
    for obj in images.iter().flat_map(|i| &i.objects) {
        counts.increment(obj.class);
    }
    counts
}

/// A single model's claim about one object.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub image_id: String,
    pub class: DefectClass,
    pub bbox: BoundingBox,
    pub score: f64,
    pub model_id: String,
}

/// All detections emitted by one model, plus optional per-image timings.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionSet {
    model_id: String,
    detections: Vec<Detection>,
    runtime_seconds: Option<BTreeMap<String, f64>>,
}

impl DetectionSet {
    pub fn new(
        model_id: impl Into<String>,
        detections: Vec<Detection>,
        runtime_seconds: Option<BTreeMap<String, f64>>,
    ) -> Result<Self> {
        let model_id = model_id.into();
        let loc = || format!("detections of model {model_id:?}");
        for (i, d) in detections.iter().enumerate() {
            if d.model_id != model_id {
                return Err(Error::validation(
                    loc(),
                    format!("detection {i} carries model id {:?}", d.model_id),
                ));
            }
            if !(0.0..=1.0).contains(&d.score) {
                return Err(Error::validation(
                    loc(),
                    format!(
                        "detection {i} on image {:?} has score {} outside [0, 1]",
                        d.image_id, d.score
                    ),
                ));
            }
        }
        if let Some(rt) = &runtime_seconds {
            if let Some((id, v)) = rt.iter().find(|(_, v)| !(v.is_finite() && **v >= 0.0)) {
                return Err(Error::validation(
                    loc(),
                    format!("runtime for image {id:?} must be a non-negative number, got {v}"),
                ));
            }
        }
        Ok(Self {
            model_id,
            detections,
            runtime_seconds,
        })
    }

    pub fn empty(model_id: impl Into<String>) -> Self {
        Self {
            model_id: model_id.into(),
            detections: Vec::new(),
            runtime_seconds: None,
        }
    }

    pub fn model_id(&self) -> &str {
        &self.model_id
    }

    pub fn detections(&self) -> &[Detection] {
        &self.detections
    }

    pub fn runtime_seconds(&self) -> Option<&BTreeMap<String, f64>> {
        self.runtime_seconds.as_ref()
    }

    pub fn len(&self) -> usize {
        self.detections.len()
    }

    pub fn is_empty(&self) -> bool {
        self.detections.is_empty()
    }

    /// Errors when a detection references an image missing from `index`.
    pub fn check_images(&self, index: &DatasetIndex) -> Result<()> {
        let ids: HashSet<&str> = index.images().iter().map(|i| i.id.as_str()).collect();
        match self
            .detections
            .iter()
            .find(|d| !ids.contains(d.image_id.as_str()))
        {
            Some(d) => Err(Error::validation(
                format!("detections of model {:?}", self.model_id),
                format!("unknown image id {:?}", d.image_id),
            )),
            None => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn obj(class: DefectClass, b: [f64; 4]) -> GroundTruthObject {
        GroundTruthObject {
            class,
            bbox: b.try_into().unwrap(),
        }
    }

    fn image(id: &str, objects: Vec<GroundTruthObject>) -> ImageRecord {
        ImageRecord {
            id: id.into(),
            path: format!("{id}.png"),
            width: 600,
            height: 600,
            objects,
        }
    }

    #[test]
    fn empty_index_has_zero_counts() {
        let idx = DatasetIndex::new(vec![]).unwrap();
        assert!(idx.is_empty());
        assert_eq!(idx.class_counts().total(), 0);
    }

    #[test]
    fn counts_follow_objects() {
        let idx = DatasetIndex::new(vec![image(
            "a",
            vec![
                obj(DefectClass::MissingHole, [0.0, 0.0, 10.0, 10.0]),
                obj(DefectClass::Spur, [5.0, 5.0, 20.0, 20.0]),
            ],
        )])
        .unwrap();
        for (c, n) in idx.class_counts().iter() {
            let expected = usize::from(matches!(c, DefectClass::MissingHole | DefectClass::Spur));
            assert_eq!(n, expected, "{c}");
        }
        assert_eq!(
            idx.present_classes(),
            vec![DefectClass::MissingHole, DefectClass::Spur]
        );
    }

    #[test]
    fn rejects_duplicates_and_out_of_bounds() {
        let dup = DatasetIndex::new(vec![image("a", vec![]), image("a", vec![])]);
        assert!(matches!(dup, Err(Error::Validation { .. })));

        let oob = DatasetIndex::new(vec![image(
            "img7",
            vec![obj(DefectClass::Short, [0.0, 0.0, 601.0, 10.0])],
        )]);
        match oob {
            Err(Error::Validation { location, .. }) => assert!(location.contains("img7")),
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn detection_set_checks_scores_and_model() {
        let det = |score: f64, model: &str| Detection {
            image_id: "a".into(),
            class: DefectClass::Spur,
            bbox: [0.0, 0.0, 1.0, 1.0].try_into().unwrap(),
            score,
            model_id: model.into(),
        };
        assert!(DetectionSet::new("m", vec![det(0.5, "m")], None).is_ok());
        assert!(DetectionSet::new("m", vec![det(1.5, "m")], None).is_err());
        assert!(DetectionSet::new("m", vec![det(0.5, "other")], None).is_err());
        let bad_rt = BTreeMap::from([("a".to_string(), -1.0)]);
        assert!(DetectionSet::new("m", vec![], Some(bad_rt)).is_err());
    }
}
