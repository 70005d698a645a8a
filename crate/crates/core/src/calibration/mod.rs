//! Principal-point correction.
//!
//! Two procedures estimate where the optical axis meets the sensor:
//!
//! * **rotation**: the camera is turned in place in 30° steps under a lamp.
//!   The lamp's image traces a circle about the principal point; a circle fit
//!   recovers it.
//! * **dispersion**: repeated fixes are taken with the camera at the world
//!   origin. Their mean (or the centre of their smallest enclosing circle) is
//!   the systematic bias, which maps back to a principal-point shift through
//!   the similar-triangles scale.

mod circle;
mod procedure;

use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use circle::{fit_circle_kasa, smallest_enclosing_circle, Circle};
pub use procedure::{
    acquire_dispersion_samples, acquire_rotation_samples, calibrate_end_to_end,
    CalibrationConfig, CalibrationOutcome,
};

use crate::geometry::{inversion_sign, CameraHeight, CameraIntrinsics, PixelPoint, Point2};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CalibrationError {
    #[error("no calibration samples")]
    EmptyInput,
    #[error("need at least {needed} samples, got {got}")]
    InsufficientSamples { needed: usize, got: usize },
    #[error("samples are collinear; no circle fits them")]
    DegenerateFit,
    #[error("{failed} of {attempted} calibration captures failed: {last}")]
    Acquisition {
        failed: usize,
        attempted: usize,
        last: String,
    },
    #[error("corrected principal point ({i:.2}, {j:.2}) lies outside the sensor")]
    OutOfSensor { i: f64, j: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Rotation,
    Dispersion,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Rotation => "rotation",
            Method::Dispersion => "dispersion",
        })
    }
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "rotation" => Ok(Method::Rotation),
            "dispersion" => Ok(Method::Dispersion),
            other => Err(format!("unknown calibration method `{other}` (rotation|dispersion)")),
        }
    }
}

/// Which dispersion centre drives the correction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DispersionCenter {
    #[default]
    Mean,
    MinCircle,
}

/// Outcome of the dispersion method: both centre estimates plus the
/// correction derived from the selected one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DispersionResult<T> {
    /// Deviation used for the correction, cm.
    pub delta: Point2<T>,
    pub mean: Point2<T>,
    pub min_circle: Circle<T>,
    pub principal_point: PixelPoint<T>,
    pub method: DispersionCenter,
}

/// Mean deviation of fixes taken at the origin.
pub fn dispersion_center_mean<T: Scalar>(samples: &[Point2<T>]) -> Result<Point2<T>, CalibrationError> {
    if samples.is_empty() {
        return Err(CalibrationError::EmptyInput);
    }
    let n = T::from_usize(samples.len()).expect("sample count fits scalar");
    let sum = samples.iter().fold(Point2::zero(), |acc, p| acc.add(p));
    Ok(sum.scale(T::one() / n))
}

/// Moves the principal point so that a camera-frame fix bias `delta` (cm)
/// vanishes.
///
/// A principal point that is off by `d` pixels biases every fix by
/// `-sigma * (H / f) * d * du` in the camera frame. Inverting that gives
/// `d = s * delta / du` with `s = -sigma * f / H`.
pub fn apply_dispersion_correction<T: Scalar>(
    nominal: PixelPoint<T>,
    delta: Point2<T>,
    k: &CameraIntrinsics<T>,
    h: CameraHeight<T>,
) -> PixelPoint<T> {
    let s = -inversion_sign::<T>() * k.focal_length / h.get();
    PixelPoint::new(nominal.i + s * delta.x / k.du, nominal.j + s * delta.y / k.dv)
}

/// Dispersion method on fixes taken at the origin with heading `theta0`.
///
/// World deviations are rotated into the camera frame before conversion.
pub fn dispersion_calibrate<T: Scalar>(
    samples: &[Point2<T>],
    theta0: T,
    center: DispersionCenter,
    k: &CameraIntrinsics<T>,
    h: CameraHeight<T>,
) -> Result<DispersionResult<T>, CalibrationError> {
    let mean = dispersion_center_mean(samples)?;
    let min_circle = smallest_enclosing_circle(samples)?;
    let world = match center {
        DispersionCenter::Mean => mean,
        DispersionCenter::MinCircle => min_circle.center,
    };
    let delta = world.rotated(-theta0);
    let principal_point = apply_dispersion_correction(k.principal_point, delta, k, h);
    Ok(DispersionResult {
        delta,
        mean,
        min_circle,
        principal_point,
        method: center,
    })
}

/// Rotation method: the centre of the circle traced by a lamp's image
/// positions (pixels) while the camera turns in place.
pub fn rotation_calibrate<T: Scalar>(
    samples: &[PixelPoint<T>],
) -> Result<PixelPoint<T>, CalibrationError> {
    let pts: Vec<Point2<T>> = samples.iter().map(|p| Point2::new(p.i, p.j)).collect();
    let c = fit_circle_kasa(&pts)?;
    Ok(PixelPoint::new(c.center.x, c.center.y))
}

/// Writes a `sample_index,x,y` log preceded by a `#` comment naming the units.
pub fn write_sample_log<W: Write>(
    mut out: W,
    units: &str,
    samples: &[Point2<f64>],
) -> io::Result<()> {
    writeln!(out, "# {units}")?;
    writeln!(out, "sample_index,x,y")?;
    for (n, p) in samples.iter().enumerate() {
        writeln!(out, "{n},{},{}", p.x, p.y)?;
    }
    Ok(())
}
