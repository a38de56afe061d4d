use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

/// Ensemble fusion and evaluation for PCB defect detection.
///
/// Every subcommand that takes `--config` reads a JSON object whose fields
/// mirror the long flag names (with `_` for `-`); flags given on the command
/// line win over the file.
#[derive(Debug, Parser)]
#[command(name = "fuselab", version, about, max_term_width = 100)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Grayscale, optionally binarize, and resize every image of a dataset.
    Preprocess(PreprocessArgs),
    /// Write the original images plus seeded augmented copies.
    Augment(AugmentArgs),
    /// Balanced train/val/test split by dominant defect class.
    Split(SplitArgs),
    /// Fabricate detections for each model profile.
    Simulate(SimulateArgs),
    /// Weighted consensus fusion of several detection files.
    Fuse(FuseArgs),
    /// Score detections against ground truth.
    Eval(EvalArgs),
    /// Choose ensemble weights on validation data.
    Tune(TuneArgs),
    /// Generate a synthetic annotated dataset (no pixels).
    Synth(SynthArgs),
    /// Build a dataset file from YOLO-format label text files.
    ImportYolo(ImportYoloArgs),
}

#[derive(Debug, Args)]
pub struct PreprocessArgs {
    /// Input dataset file.
    #[arg(long)]
    pub dataset: PathBuf,
    /// Output directory (images/ plus dataset.json).
    #[arg(long)]
    pub out: PathBuf,
    /// Square target size in pixels [default: 600].
    #[arg(long)]
    pub size: Option<u32>,
    /// Binarize with Otsu's threshold before resizing [default: off].
    #[arg(long)]
    pub binarize: bool,
    /// JSON settings file (fields: size, binarize).
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AugmentArgs {
    /// Input dataset file.
    #[arg(long)]
    pub dataset: PathBuf,
    /// Output directory (images/ plus dataset.json).
    #[arg(long)]
    pub out: PathBuf,
    /// Comma-separated ops: rot90, rot180, rot270, flip_h, flip_v,
    /// brightness:F, rescale:F [required unless set in --config].
    #[arg(long, value_delimiter = ',')]
    pub ops: Option<Vec<String>>,
    /// Augmented copies per image, each with a randomly chosen op [default: 1].
    #[arg(long)]
    pub copies: Option<u32>,
    /// Random seed [default: 0].
    #[arg(long)]
    pub seed: Option<u64>,
    /// JSON settings file (fields: ops, copies, seed).
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    /// Input dataset file.
    #[arg(long)]
    pub dataset: PathBuf,
    /// Output directory (train.json, val.json, test.json, allocation.json).
    #[arg(long)]
    pub out: PathBuf,
    /// Training fraction [default: 0.7].
    #[arg(long)]
    pub train: Option<f64>,
    /// Validation fraction [default: 0.15].
    #[arg(long)]
    pub val: Option<f64>,
    /// Test fraction [default: 0.15].
    #[arg(long)]
    pub test: Option<f64>,
    /// Random seed [default: 0].
    #[arg(long)]
    pub seed: Option<u64>,
    /// JSON settings file (fields: train, val, test, seed).
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Ground-truth dataset file.
    #[arg(long)]
    pub dataset: PathBuf,
    /// Model profiles (JSON array, or object with a "models" array).
    #[arg(long)]
    pub profiles: PathBuf,
    /// Random seed [default: 0].
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory, one detections file per model.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FuseArgs {
    /// Detection files, one per model.
    #[arg(long, num_args = 1.., required = true)]
    pub dets: Vec<PathBuf>,
    /// Comma-separated weights in --dets order, normalized to sum 1
    /// [default: uniform, or the weights in --config].
    #[arg(long, value_delimiter = ',')]
    pub weights: Option<Vec<f64>>,
    /// Ensemble config JSON, as written by `tune`.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// IoU needed for a box to support an anchor [default: 0.5].
    #[arg(long)]
    pub match_iou: Option<f64>,
    /// Consensus acceptance threshold [default: 0.25].
    #[arg(long)]
    pub accept: Option<f64>,
    /// Class-aware NMS on fused boxes at this IoU [default: off].
    #[arg(long)]
    pub nms: Option<f64>,
    /// Fused detections file.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Ground-truth dataset file.
    #[arg(long)]
    pub gt: PathBuf,
    /// Detections file to score.
    #[arg(long)]
    pub dets: PathBuf,
    /// Single IoU gate [default: 0.5].
    #[arg(long, conflicts_with = "coco_range")]
    pub iou: Option<f64>,
    /// Average over IoU gates 0.50, 0.55, ..., 0.95 [default: off].
    #[arg(long)]
    pub coco_range: bool,
    /// Score cut for accuracy, precision and recall [default: 0.5].
    #[arg(long)]
    pub score_threshold: Option<f64>,
    /// Write annotated PNGs into this directory [default: off].
    #[arg(long)]
    pub overlays: Option<PathBuf>,
    /// Also write the per-class table as CSV [default: off].
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Drop detections on images missing from --gt, e.g. to score one
    /// split of a larger run [default: off, such detections are an error].
    #[arg(long)]
    pub subset: bool,
    /// Base-model detection files whose timings are summarized in the
    /// report [default: none].
    #[arg(long, num_args = 1..)]
    pub inputs: Vec<PathBuf>,
    /// Evaluation config JSON (fields: iou_thresholds, score_threshold, classes).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Report file.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TuneArgs {
    /// Validation ground-truth dataset file.
    #[arg(long)]
    pub gt: PathBuf,
    /// Detection files, one per model.
    #[arg(long, num_args = 1.., required = true)]
    pub dets: Vec<PathBuf>,
    /// Search method: grid, coord or proportional [default: grid].
    #[arg(long)]
    pub method: Option<String>,
    /// Objective: map50, map50_95 or accuracy [default: map50].
    #[arg(long)]
    pub objective: Option<String>,
    /// Grid spacing on the weight simplex [default: 0.05].
    #[arg(long)]
    pub resolution: Option<f64>,
    /// Coordinate-ascent step [default: 0.05].
    #[arg(long)]
    pub step: Option<f64>,
    /// Coordinate-ascent round limit [default: 20].
    #[arg(long)]
    pub max_rounds: Option<usize>,
    /// Score cut for the accuracy objective [default: 0.5].
    #[arg(long)]
    pub score_threshold: Option<f64>,
    /// Base ensemble config JSON; its thresholds are kept [default: uniform].
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// IoU needed for a box to support an anchor [default: 0.5].
    #[arg(long)]
    pub match_iou: Option<f64>,
    /// Consensus acceptance threshold [default: 0.25].
    #[arg(long)]
    pub accept: Option<f64>,
    /// Class-aware NMS on fused boxes at this IoU [default: off].
    #[arg(long)]
    pub nms: Option<f64>,
    /// Search trace CSV [default: <out>.trace.csv].
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Winning ensemble config.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Number of images [default: 200].
    #[arg(long)]
    pub images: Option<usize>,
    /// Image width [default: 600].
    #[arg(long)]
    pub width: Option<u32>,
    /// Image height [default: 600].
    #[arg(long)]
    pub height: Option<u32>,
    /// Comma-separated relative class frequencies, canonical class order
    /// [default: all 1].
    #[arg(long, value_delimiter = ',')]
    pub class_weights: Option<Vec<f64>>,
    /// Fewest objects on a defective image [default: 1].
    #[arg(long)]
    pub min_objects: Option<usize>,
    /// Most objects on a defective image [default: 4].
    #[arg(long)]
    pub max_objects: Option<usize>,
    /// Probability of a defect-free image [default: 0].
    #[arg(long)]
    pub defect_free_fraction: Option<f64>,
    /// Random seed [default: 0].
    #[arg(long)]
    pub seed: Option<u64>,
    /// JSON settings file (any synthetic dataset field).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Dataset file to write.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ImportYoloArgs {
    /// Directory of images (png, jpg, jpeg, bmp).
    #[arg(long)]
    pub images: PathBuf,
    /// Directory of label .txt files named after the images.
    #[arg(long)]
    pub labels: PathBuf,
    /// Comma-separated class names for label indices 0, 1, ...
    /// [default: canonical class order].
    #[arg(long, value_delimiter = ',')]
    pub classes: Option<Vec<String>>,
    /// Dataset file to write.
    #[arg(long)]
    pub out: PathBuf,
}
