//! Seeded stand-ins for trained detectors, plus a synthetic ground-truth
//! generator.
//!
//! Randomness is drawn per (model, image) from a counter-based stream, so a
//! model's output depends only on the seed, its stream id and the ground
//! truth, never on the other profiles or on thread scheduling.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use rand::distr::weighted::WeightedIndex;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data_model::{
    DatasetIndex, DefectClass, Detection, DetectionSet, GroundTruthObject, ImageRecord,
};
use crate::error::{Error, Result};
use crate::geometry::BoundingBox;
use crate::{par, rng};

const FP_MIN_SIDE: f64 = 10.0;
const FP_MAX_SIDE: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreDist {
    Beta { alpha: f64, beta: f64 },
    Constant(f64),
}

impl ScoreDist {
    fn validate(&self, what: &str) -> Result<()> {
        match *self {
            ScoreDist::Beta { alpha, beta }
                if !(alpha > 0.0 && beta > 0.0 && alpha.is_finite() && beta.is_finite()) =>
            {
                Err(Error::config(format!(
                    "{what}: Beta parameters must be positive, got ({alpha}, {beta})"
                )))
            }
            ScoreDist::Constant(v) if !(0.0..=1.0).contains(&v) => Err(Error::config(format!(
                "{what}: constant score must lie in [0, 1], got {v}"
            ))),
            _ => Ok(()),
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            ScoreDist::Beta { alpha, beta } => alpha / (alpha + beta),
            ScoreDist::Constant(v) => v,
        }
    }

    fn sample(&self, r: &mut ChaCha8Rng) -> f64 {
        match *self {
            ScoreDist::Beta { alpha, beta } => {
                let d = Beta::new(alpha, beta).expect("validated Beta parameters");
                d.sample(r).clamp(0.0, 1.0)
            }
            ScoreDist::Constant(v) => v,
        }
    }
}

fn default_tp_score() -> ScoreDist {
    ScoreDist::Beta {
        alpha: 8.0,
        beta: 2.0,
    }
}

fn default_fp_score() -> ScoreDist {
    ScoreDist::Beta {
        alpha: 3.0,
        beta: 7.0,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimModelProfile {
    pub model_id: String,
    #[serde(default)]
    pub miss_rate: f64,
    #[serde(default)]
    pub fp_per_image: f64,
    #[serde(default)]
    pub loc_sigma: f64,
    #[serde(default)]
    pub confusion_rate: f64,
    #[serde(default = "default_tp_score")]
    pub tp_score: ScoreDist,
    #[serde(default = "default_fp_score")]
    pub fp_score: ScoreDist,
    #[serde(default)]
    pub per_image_runtime: f64,
    /// Random stream id; defaults to the profile's position in the list.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stream: Option<u64>,
}

impl SimModelProfile {
    /// A perfect detector: no misses, no false positives, exact boxes,
    /// default score distributions.
    pub fn new(model_id: impl Into<String>) -> Self {
        Self {
            model_id: model_id.into(),
            miss_rate: 0.0,
            fp_per_image: 0.0,
            loc_sigma: 0.0,
            confusion_rate: 0.0,
            tp_score: default_tp_score(),
            fp_score: default_fp_score(),
            per_image_runtime: 0.0,
            stream: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let id = &self.model_id;
        if id.trim().is_empty() {
            return Err(Error::config("profile model_id must not be empty"));
        }
        for (name, v) in [
            ("miss_rate", self.miss_rate),
            ("confusion_rate", self.confusion_rate),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::config(format!(
                    "{id}: {name} must lie in [0, 1], got {v}"
                )));
            }
        }
        for (name, v) in [
            ("fp_per_image", self.fp_per_image),
            ("loc_sigma", self.loc_sigma),
            ("per_image_runtime", self.per_image_runtime),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::config(format!(
                    "{id}: {name} must be finite and non-negative, got {v}"
                )));
            }
        }
        self.tp_score.validate(&format!("{id}: tp_score"))?;
        self.fp_score.validate(&format!("{id}: fp_score"))
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ProfilesDoc {
    List(Vec<SimModelProfile>),
    Wrapped { models: Vec<SimModelProfile> },
}

/// Parses a profiles document: either a JSON array of profiles or an object
/// with a `models` array.
pub fn parse_profiles(text: &str, source: &str) -> Result<Vec<SimModelProfile>> {
    let doc: ProfilesDoc = serde_json::from_str(text).map_err(|e| Error::Schema {
        location: source.to_string(),
        message: format!("not a profile list: {e}"),
    })?;
    let profiles = match doc {
        ProfilesDoc::List(v) | ProfilesDoc::Wrapped { models: v } => v,
    };
    check_profiles(&profiles)?;
    Ok(profiles)
}

pub fn load_profiles(path: impl AsRef<Path>) -> Result<Vec<SimModelProfile>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_profiles(&text, &path.display().to_string())
}

fn check_profiles(profiles: &[SimModelProfile]) -> Result<()> {
    if profiles.is_empty() {
        return Err(Error::config("at least one model profile is required"));
    }
    let mut ids = HashSet::new();
    let mut streams = HashSet::new();
    for (m, p) in profiles.iter().enumerate() {
        p.validate()?;
        if !ids.insert(p.model_id.as_str()) {
            return Err(Error::config(format!(
                "duplicate model id {:?}",
                p.model_id
            )));
        }
        if !streams.insert(p.stream.unwrap_or(m as u64)) {
            return Err(Error::config(format!(
                "{}: random stream id is already in use",
                p.model_id
            )));
        }
    }
    Ok(())
}

/// Widens `[lo, hi]` to at least one unit inside `[0, limit]` when jitter
/// collapsed it.
fn ensure_extent(lo: f64, hi: f64, limit: f64) -> (f64, f64) {
    if hi - lo >= 1e-6 {
        return (lo, hi);
    }
    let side = limit.min(1.0);
    let start = (lo - side / 2.0).clamp(0.0, limit - side);
    (start, start + side)
}

fn jitter(b: &BoundingBox, sigma: f64, w: f64, h: f64, r: &mut ChaCha8Rng) -> BoundingBox {
    let mut noise = [0.0; 4];
    for n in &mut noise {
        let z: f64 = StandardNormal.sample(r);
        *n = z * sigma;
    }
    let [x0, y0, x1, y1] = b.to_array();
    let xa = (x0 + noise[0]).clamp(0.0, w);
    let ya = (y0 + noise[1]).clamp(0.0, h);
    let xb = (x1 + noise[2]).clamp(0.0, w);
    let yb = (y1 + noise[3]).clamp(0.0, h);
    let (x0, x1) = ensure_extent(xa.min(xb), xa.max(xb), w);
    let (y0, y1) = ensure_extent(ya.min(yb), ya.max(yb), h);
    BoundingBox::new(x0, y0, x1, y1).expect("jittered box kept valid")
}

fn other_class(true_class: DefectClass, r: &mut ChaCha8Rng) -> DefectClass {
    let k = r.random_range(0..DefectClass::COUNT - 1);
    let k = if k >= true_class.index() { k + 1 } else { k };
    DefectClass::ALL[k]
}

fn random_box(w: f64, h: f64, r: &mut ChaCha8Rng) -> BoundingBox {
    let bw = r.random_range(FP_MIN_SIDE..=FP_MAX_SIDE).min(w);
    let bh = r.random_range(FP_MIN_SIDE..=FP_MAX_SIDE).min(h);
    let x0 = r.random_range(0.0..=w - bw);
    let y0 = r.random_range(0.0..=h - bh);
    BoundingBox::new(x0, y0, x0 + bw, y0 + bh).expect("sampled box is valid")
}

fn simulate_image(p: &SimModelProfile, img: &ImageRecord, r: &mut ChaCha8Rng) -> Vec<Detection> {
    let (w, h) = (img.width as f64, img.height as f64);
    let mut out = Vec::new();
    for o in &img.objects {
        let emitted = r.random::<f64>() >= p.miss_rate;
        if !emitted {
            continue;
        }
        let bbox = jitter(&o.bbox, p.loc_sigma, w, h, r);
        let class = if r.random::<f64>() < p.confusion_rate {
            other_class(o.class, r)
        } else {
            o.class
        };
        out.push(Detection {
            image_id: img.id.clone(),
            class,
            bbox,
            score: p.tp_score.sample(r),
            model_id: p.model_id.clone(),
        });
    }
    let n_fp = if p.fp_per_image > 0.0 {
        let d = Poisson::new(p.fp_per_image).expect("validated rate");
        d.sample(r) as usize
    } else {
        0
    };
    for _ in 0..n_fp {
        let bbox = random_box(w, h, r);
        let class = DefectClass::ALL[r.random_range(0..DefectClass::COUNT)];
        out.push(Detection {
            image_id: img.id.clone(),
            class,
            bbox,
            score: p.fp_score.sample(r),
            model_id: p.model_id.clone(),
        });
    }
    out
}

/// One detection set per profile, in profile order. Within a set,
/// detections follow image order, then ground-truth order, then false
/// positives.
pub fn simulate(
    gt: &DatasetIndex,
    profiles: &[SimModelProfile],
    seed: u64,
) -> Result<Vec<DetectionSet>> {
    check_profiles(profiles)?;
    let n_img = gt.len();
    let cells = par::map_range(profiles.len() * n_img, |k| {
        let (m, i) = (k / n_img, k % n_img);
        let p = &profiles[m];
        let mut r = rng::stream(
            seed,
            rng::DOMAIN_SIMULATE,
            p.stream.unwrap_or(m as u64),
            i as u64,
        );
        simulate_image(p, &gt.images()[i], &mut r)
    });
    let mut cells = cells.into_iter();
    profiles
        .iter()
        .map(|p| {
            let dets: Vec<Detection> = cells.by_ref().take(n_img).flatten().collect();
            let runtime: BTreeMap<String, f64> = gt
                .images()
                .iter()
                .map(|img| (img.id.clone(), p.per_image_runtime))
                .collect();
            DetectionSet::new(p.model_id.clone(), dets, Some(runtime))
        })
        .collect()
}

/// Parameters of a synthetic annotated dataset (no pixel data).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthSpec {
    pub images: usize,
    pub width: u32,
    pub height: u32,
    /// Relative frequency of each class, canonical order.
    pub class_weights: Vec<f64>,
    pub min_objects: usize,
    pub max_objects: usize,
    /// Probability that an image carries no defect at all.
    pub defect_free_fraction: f64,
    pub min_side: f64,
    pub max_side: f64,
    /// When set, all objects of an image share one class.
    pub single_class_images: bool,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            images: 200,
            width: 600,
            height: 600,
            class_weights: vec![1.0; DefectClass::COUNT],
            min_objects: 1,
            max_objects: 4,
            defect_free_fraction: 0.0,
            min_side: 10.0,
            max_side: 100.0,
            single_class_images: false,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::config("image dimensions must be positive"));
        }
        if self.class_weights.len() != DefectClass::COUNT {
            return Err(Error::config(format!(
                "class_weights needs {} entries, got {}",
                DefectClass::COUNT,
                self.class_weights.len()
            )));
        }
        if WeightedIndex::new(&self.class_weights).is_err() {
            return Err(Error::config(
                "class_weights must be non-negative with a positive sum",
            ));
        }
        if self.min_objects > self.max_objects {
            return Err(Error::config("min_objects exceeds max_objects"));
        }
        if !(0.0..=1.0).contains(&self.defect_free_fraction) {
            return Err(Error::config("defect_free_fraction must lie in [0, 1]"));
        }
        let fits = self.max_side <= self.width.min(self.height) as f64;
        if !(self.min_side > 0.0 && self.min_side <= self.max_side && fits) {
            return Err(Error::config(
                "object sides must satisfy 0 < min_side <= max_side <= image size",
            ));
        }
        Ok(())
    }
}

/// Generates image records with random boxes; paths point at
/// `synthetic/<id>.png`, which is never written.
pub fn synthetic_dataset(spec: &SynthSpec) -> Result<DatasetIndex> {
    spec.validate()?;
    let classes = WeightedIndex::new(&spec.class_weights).expect("validated weights");
    let (w, h) = (spec.width as f64, spec.height as f64);
    let images = par::map_range(spec.images, |i| {
        let mut r = rng::stream(spec.seed, rng::DOMAIN_SYNTH, i as u64, 0);
        let defect_free = r.random::<f64>() < spec.defect_free_fraction;
        let n = r.random_range(spec.min_objects..=spec.max_objects);
        let n = if defect_free { 0 } else { n };
        let shared = DefectClass::ALL[classes.sample(&mut r)];
        let objects = (0..n)
            .map(|_| {
                let class = if spec.single_class_images {
                    shared
                } else {
                    DefectClass::ALL[classes.sample(&mut r)]
                };
                let bw = r.random_range(spec.min_side..=spec.max_side);
                let bh = r.random_range(spec.min_side..=spec.max_side);
                let x0 = r.random_range(0.0..=w - bw);
                let y0 = r.random_range(0.0..=h - bh);
                GroundTruthObject {
                    class,
                    bbox: BoundingBox::new(x0, y0, x0 + bw, y0 + bh).expect("sampled box is valid"),
                }
            })
            .collect();
        let id = format!("synth_{i:05}");
        ImageRecord {
            path: format!("synthetic/{id}.png"),
            id,
            width: spec.width,
            height: spec.height,
            objects,
        }
    });
    DatasetIndex::new(images)
}
