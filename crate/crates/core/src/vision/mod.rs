//! Lamp region extraction and tracking.

mod blobs;
mod otsu;
mod tracking;

pub use blobs::{extract_rois, measure_window, DetectionConfig, RoiWindow};
pub use otsu::{otsu_threshold, GrayHistogram, OtsuThreshold};
pub use tracking::{bhattacharyya, intensity_histogram, track_step, TrackState, TrackerConfig};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VisionError {
    #[error("histogram is empty")]
    EmptyHistogram,
    #[error("histogram holds {0} samples, more than exact Otsu scoring supports")]
    HistogramTooLarge(u64),
    #[error("histogram does not sum to 1 (sum = {0})")]
    NotNormalized(f64),
    #[error("histograms have different bin counts ({0} vs {1})")]
    BinMismatch(usize, usize),
    #[error("track lost after coasting {0} frames")]
    TrackLost(u32),
}
