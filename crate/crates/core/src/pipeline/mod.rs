//! Frame in, pose out; plus the grid experiment built on top of it.

mod experiment;
mod stats;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

pub use experiment::{
    derive_trial_seed, run_grid_experiment, ExperimentRun, GridConfig, GridSpec, HeadingMode,
    TrialRecord, TrialStatus,
};
pub use stats::{
    check_failure_rate, compute_stats, write_results_csv, write_stats_csv, ErrorStats, Histogram,
    HISTOGRAM_BIN_CM, MAX_FAILURE_RATE, RESULTS_HEADER,
};

use crate::calibration::CalibrationError;
use crate::decode::{decode_roi, DecodeConfig, DecodeError, DecodedLed};
use crate::geometry::{pixel_to_image, position_from_two_leds, Anchor, GeometryError, PairTolerance};
use crate::scenario::ScenarioError;
use crate::scene_sim::SimError;
use crate::vision::{
    extract_rois, otsu_threshold, track_step, DetectionConfig, GrayHistogram, TrackState,
    TrackerConfig, VisionError,
};
use crate::{CameraHeight, CameraIntrinsics, Frame, LedId, LedRegistry, PixelPoint, Pose2D, RollingShutterConfig};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PipelineError {
    #[error("need two identified lamps, found {found}")]
    InsufficientBeacons { found: usize },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Vision(#[from] VisionError),
    #[error(transparent)]
    Decode(#[from] DecodeError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("calibration failed: {0}")]
    Calibration(#[from] CalibrationError),
    #[error("no successful trials")]
    EmptyInput,
    #[error("{failed} of {total} trials failed (limit {limit_pct}%)")]
    TooManyFailures {
        failed: usize,
        total: usize,
        limit_pct: f64,
    },
}

impl PipelineError {
    /// Short stable tag used in result files.
    pub fn kind(&self) -> &'static str {
        match self {
            PipelineError::InsufficientBeacons { .. } => "insufficient_beacons",
            PipelineError::Geometry(_) => "geometry",
            PipelineError::Vision(_) => "vision",
            PipelineError::Decode(_) => "decode",
            PipelineError::Sim(_) => "simulation",
            PipelineError::Scenario(_) => "scenario",
            PipelineError::Calibration(_) => "calibration",
            PipelineError::EmptyInput => "empty_input",
            PipelineError::TooManyFailures { .. } => "too_many_failures",
        }
    }
}

/// A pose estimate and what it was computed from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PositionFix {
    pub pose: Pose2D,
    pub led_pair: (LedId, LedId),
    pub centroids: [PixelPoint; 2],
    pub period_confidence: [f64; 2],
    /// Lamps identified in the frame.
    pub identified: usize,
    pub frame_index: u64,
}

/// Everything [`Localizer::locate`] needs besides the frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Localizer {
    pub registry: LedRegistry,
    pub intrinsics: CameraIntrinsics,
    pub height: CameraHeight,
    pub rolling_shutter: RollingShutterConfig,
    pub detection: DetectionConfig,
    pub decode: DecodeConfig,
    pub tracker: TrackerConfig,
}

impl Localizer {
    /// Finds and identifies lamps.
    ///
    /// With `tracks`, existing tracks are advanced and only their gates are
    /// read. A full-frame detection runs when there are fewer than two live
    /// tracks, and its regions seed new tracks. Regions that fail to decode
    /// are skipped.
    pub fn detect(
        &self,
        frame: &Frame,
        tracks: Option<&mut Vec<TrackState>>,
    ) -> Result<Vec<DecodedLed>, PipelineError> {
        match tracks {
            Some(tracks) if tracks.len() >= 2 => {
                let mut live = Vec::with_capacity(tracks.len());
                let mut found = Vec::new();
                for t in tracks.iter() {
                    match track_step(t, frame, &self.tracker) {
                        Ok((next, roi)) => {
                            if roi.disc.is_some() {
                                if let Ok(d) = self.decode_one(frame, &roi) {
                                    found.push(d);
                                }
                            }
                            live.push(next);
                        }
                        Err(VisionError::TrackLost(_)) => {}
                        Err(e) => return Err(e.into()),
                    }
                }
                if live.len() >= 2 && found.len() >= 2 {
                    *tracks = live;
                    return Ok(dedup_by_id(found));
                }
                let (found, fresh) = self.detect_full(frame, true)?;
                *tracks = fresh;
                Ok(found)
            }
            Some(tracks) => {
                let (found, fresh) = self.detect_full(frame, true)?;
                *tracks = fresh;
                Ok(found)
            }
            None => Ok(self.detect_full(frame, false)?.0),
        }
    }

    fn decode_one(&self, frame: &Frame, roi: &crate::vision::RoiWindow) -> Result<DecodedLed, DecodeError> {
        decode_roi(
            frame,
            roi,
            &self.registry,
            &self.intrinsics,
            &self.rolling_shutter,
            &self.decode,
        )
    }

    fn detect_full(
        &self,
        frame: &Frame,
        seed_tracks: bool,
    ) -> Result<(Vec<DecodedLed>, Vec<TrackState>), PipelineError> {
        let otsu = otsu_threshold(&GrayHistogram::from_frame_row_smoothed(
            frame,
            self.detection.threshold_smoothing,
        ))?;
        if otsu.degenerate {
            return Ok((Vec::new(), Vec::new()));
        }
        let rois = extract_rois(frame, otsu.threshold, &self.detection);
        let mut found = Vec::new();
        let mut tracks = Vec::new();
        for roi in &rois {
            if let Ok(d) = self.decode_one(frame, roi) {
                found.push(d);
                if seed_tracks {
                    if let Ok(t) = TrackState::from_roi(roi, frame, otsu.threshold, &self.tracker) {
                        tracks.push(t);
                    }
                }
            }
        }
        Ok((dedup_by_id(found), tracks))
    }

    /// Pose from already identified lamps.
    pub fn solve(&self, detections: &[DecodedLed], frame_index: u64) -> Result<PositionFix, PipelineError> {
        let (a, b) = select_led_pair(detections)?;
        let anchor = |d: &DecodedLed| Anchor {
            id: d.id.0,
            position: d.world,
        };
        let pose = position_from_two_leds(
            &anchor(&a),
            &anchor(&b),
            a.image_centroid,
            b.image_centroid,
            &self.intrinsics,
            self.height,
            &PairTolerance::default(),
        )?;
        Ok(PositionFix {
            pose,
            led_pair: (a.id, b.id),
            centroids: [a.pixel_centroid, b.pixel_centroid],
            period_confidence: [a.period.confidence, b.period.confidence],
            identified: detections.len(),
            frame_index,
        })
    }

    /// Otsu, lamp regions (or tracking), decoding, pair selection, pose.
    pub fn locate(
        &self,
        frame: &Frame,
        tracks: Option<&mut Vec<TrackState>>,
    ) -> Result<PositionFix, PipelineError> {
        let found = self.detect(frame, tracks)?;
        self.solve(&found, 0)
    }
}

/// Free-function form of [`Localizer::locate`].
pub fn locate(
    frame: &Frame,
    localizer: &Localizer,
    tracks: Option<&mut Vec<TrackState>>,
) -> Result<PositionFix, PipelineError> {
    localizer.locate(frame, tracks)
}

/// Keeps the most confident detection of each id.
fn dedup_by_id(mut found: Vec<DecodedLed>) -> Vec<DecodedLed> {
    let mut out: Vec<DecodedLed> = Vec::with_capacity(found.len());
    for d in found.drain(..) {
        match out.iter_mut().find(|o| o.id == d.id) {
            Some(o) if d.period.confidence > o.period.confidence => *o = d,
            Some(_) => {}
            None => out.push(d),
        }
    }
    out
}

/// The pair with the widest image separation, ordered by ascending id.
pub fn select_led_pair(detections: &[DecodedLed]) -> Result<(DecodedLed, DecodedLed), PipelineError> {
    if detections.len() < 2 {
        return Err(PipelineError::InsufficientBeacons {
            found: detections.len(),
        });
    }
    let mut best = (0, 1);
    let mut best_d = f64::NEG_INFINITY;
    for a in 0..detections.len() {
        for b in a + 1..detections.len() {
            let d = detections[a].pixel_centroid.distance(&detections[b].pixel_centroid);
            if d > best_d {
                best_d = d;
                best = (a, b);
            }
        }
    }
    let (a, b) = (detections[best.0], detections[best.1]);
    Ok(if a.id <= b.id { (a, b) } else { (b, a) })
}

/// Adds independent Gaussian noise of `sigma` px to every lamp centroid.
pub fn jitter_detections<R: Rng>(
    detections: &mut [DecodedLed],
    sigma: f64,
    k: &CameraIntrinsics,
    rng: &mut R,
) {
    if sigma <= 0.0 {
        return;
    }
    let n = Normal::new(0.0, sigma).expect("sigma validated");
    for d in detections {
        d.pixel_centroid = PixelPoint::new(
            d.pixel_centroid.i + n.sample(rng),
            d.pixel_centroid.j + n.sample(rng),
        );
        d.image_centroid = pixel_to_image(d.pixel_centroid, k);
    }
}
