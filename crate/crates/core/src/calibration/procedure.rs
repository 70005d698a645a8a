//! Simulated acquisition for both calibration methods.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    dispersion_calibrate, rotation_calibrate, CalibrationError, DispersionCenter, DispersionResult,
    Method,
};
use crate::pipeline::{jitter_detections, PipelineError};
use crate::{CameraIntrinsics, LedId, PixelPoint, Point2, Pose2D, Scenario};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationConfig {
    /// Where the camera stands for both procedures, cm. The dispersion
    /// method treats this as the true position of every fix.
    pub station: [f64; 2],
    /// Camera heading at the station for the dispersion fixes, radians.
    pub station_heading: f64,
    pub dispersion_fixes: usize,
    pub dispersion_center: DispersionCenter,
    pub rotation_captures: usize,
    pub rotation_step_deg: f64,
    /// Lamp whose image is followed during the rotation.
    pub rotation_led: LedId,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self {
            station: [0.0, 0.0],
            station_heading: 0.0,
            dispersion_fixes: 60,
            dispersion_center: DispersionCenter::Mean,
            rotation_captures: 12,
            rotation_step_deg: 30.0,
            rotation_led: LedId(1),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationOutcome {
    pub method: Method,
    /// Input intrinsics with the corrected principal point.
    pub intrinsics: CameraIntrinsics,
    /// Rotation: lamp image positions, px. Dispersion: fixes, cm.
    pub samples: Vec<Point2>,
    pub dispersion: Option<DispersionResult<f64>>,
    /// Captures that produced no sample.
    pub failed: usize,
}

fn acquisition_error(failed: usize, attempted: usize, last: Option<PipelineError>) -> CalibrationError {
    CalibrationError::Acquisition {
        failed,
        attempted,
        last: last.map_or_else(|| "no lamp found".to_string(), |e| e.to_string()),
    }
}

/// Turns the camera in place at the station and records where the rotation
/// lamp appears in each capture. The lens sits `rotation_axis_offset` away
/// from the turning axis, as a real mount would.
pub fn acquire_rotation_samples(
    scenario: &Scenario,
    seed: u64,
) -> Result<(Vec<PixelPoint>, usize), CalibrationError> {
    let cfg = &scenario.calibration;
    let scene = scenario.scene().map_err(|e| acquisition_error(0, 0, Some(e.into())))?;
    let localizer = scenario
        .localizer(scenario.camera)
        .map_err(|e| acquisition_error(0, 0, Some(e.into())))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let axis = Point2::new(cfg.station[0], cfg.station[1]);
    let ecc = Point2::new(
        scenario.noise.rotation_axis_offset[0],
        scenario.noise.rotation_axis_offset[1],
    );
    let mut samples = Vec::with_capacity(cfg.rotation_captures);
    let mut last = None;
    for k in 0..cfg.rotation_captures {
        let theta = (k as f64 * cfg.rotation_step_deg).to_radians();
        let lens = axis.add(&ecc.rotated(theta));
        let pose = Pose2D::new(lens.x, lens.y, theta);
        let frame = scene.render_random_phase(&pose, &mut rng);
        match localizer.detect(&frame, None) {
            Ok(mut found) => {
                jitter_detections(
                    &mut found,
                    scenario.noise.centroid_jitter_sigma,
                    &localizer.intrinsics,
                    &mut rng,
                );
                if let Some(d) = found.iter().find(|d| d.id == cfg.rotation_led) {
                    samples.push(d.pixel_centroid);
                }
            }
            Err(e) => last = Some(e),
        }
    }
    let failed = cfg.rotation_captures - samples.len();
    if samples.len() < 3 {
        return Err(acquisition_error(failed, cfg.rotation_captures, last));
    }
    Ok((samples, failed))
}

/// Repeated fixes with the camera at the station, using the uncorrected
/// intrinsics. Returned relative to the station, cm.
pub fn acquire_dispersion_samples(
    scenario: &Scenario,
    seed: u64,
) -> Result<(Vec<Point2>, usize), CalibrationError> {
    let cfg = &scenario.calibration;
    let scene = scenario.scene().map_err(|e| acquisition_error(0, 0, Some(e.into())))?;
    let localizer = scenario
        .localizer(scenario.camera)
        .map_err(|e| acquisition_error(0, 0, Some(e.into())))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let station = Pose2D::new(cfg.station[0], cfg.station[1], cfg.station_heading);
    let mut samples = Vec::with_capacity(cfg.dispersion_fixes);
    let mut last = None;
    for n in 0..cfg.dispersion_fixes {
        let frame = scene.render_random_phase(&station, &mut rng);
        let fix = localizer.detect(&frame, None).and_then(|mut found| {
            jitter_detections(
                &mut found,
                scenario.noise.centroid_jitter_sigma,
                &localizer.intrinsics,
                &mut rng,
            );
            localizer.solve(&found, n as u64)
        });
        match fix {
            Ok(f) => samples.push(Point2::new(f.pose.x - station.x, f.pose.y - station.y)),
            Err(e) => last = Some(e),
        }
    }
    let failed = cfg.dispersion_fixes - samples.len();
    if samples.is_empty() {
        return Err(acquisition_error(failed, cfg.dispersion_fixes, last));
    }
    Ok((samples, failed))
}

/// Runs one calibration protocol in simulation and returns the scenario's
/// believed intrinsics with the corrected principal point.
pub fn calibrate_end_to_end(
    method: Method,
    scenario: &Scenario,
    seed: u64,
) -> Result<CalibrationOutcome, CalibrationError> {
    let k = scenario.camera;
    let (principal_point, samples, dispersion, failed) = match method {
        Method::Rotation => {
            let (px, failed) = acquire_rotation_samples(scenario, seed)?;
            let pp = rotation_calibrate(&px)?;
            let pts = px.iter().map(|p| Point2::new(p.i, p.j)).collect();
            (pp, pts, None, failed)
        }
        Method::Dispersion => {
            let (fixes, failed) = acquire_dispersion_samples(scenario, seed)?;
            let h = scenario.height().map_err(|e| acquisition_error(0, 0, Some(e.into())))?;
            let r = dispersion_calibrate(
                &fixes,
                scenario.calibration.station_heading,
                scenario.calibration.dispersion_center,
                &k,
                h,
            )?;
            (r.principal_point, fixes, Some(r), failed)
        }
    };
    let (w, h) = (f64::from(k.width), f64::from(k.height));
    let inside = |v: f64, size: f64| (-0.1 * size..=1.1 * size).contains(&v);
    if !(inside(principal_point.i, w) && inside(principal_point.j, h)) {
        return Err(CalibrationError::OutOfSensor {
            i: principal_point.i,
            j: principal_point.j,
        });
    }
    let mut intrinsics = k;
    intrinsics.principal_point = principal_point;
    Ok(CalibrationOutcome {
        method,
        intrinsics,
        samples,
        dispersion,
        failed,
    })
}
