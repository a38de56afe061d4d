//! Ensemble fusion and evaluation toolkit for PCB defect detection.
//!
//! The pipeline runs downstream of the base detectors: preprocess and
//! augment annotated images, split them into balanced partitions, fuse the
//! detections of several models with a weighted consensus vote, tune the
//! vote weights on validation data, and score everything with mAP and
//! confusion-based metrics. A seeded simulator produces stand-in detector
//! output for experiments without trained networks.

pub mod data_model;
pub mod error;
pub mod evaluator;
pub mod fusion;
pub mod geometry;
pub mod par;
pub mod preprocess;
mod rng;
pub mod simulator;
pub mod splitter;
pub mod tuner;

pub use error::{Error, Result};
