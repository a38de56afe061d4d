//! Image normalization and augmentation: grayscale, Otsu binarization,
//! bilinear resizing, and box-consistent geometric/photometric augmentation.

mod augment;
mod otsu;
mod pipeline;
mod raster;

pub use augment::{apply_augment, AugmentOp};
pub use otsu::{binarize_otsu, otsu_threshold};
pub use pipeline::{
    augment_dataset, file_stems, preprocess_pipeline, resolve_image_path, AugmentConfig,
    ImageFailure, PipelineOutput, PreprocessConfig,
};
pub use raster::{resize, to_grayscale, RasterImage};
