//! Coordinate frames and the two-beacon pose solver.
//!
//! Frames used throughout the crate:
//!
//! * **world**: centimetres, `x`/`y` on the floor, `z` up. Lamps hang at a
//!   common ceiling height.
//! * **pixel**: `(i, j)` with the origin at the top-left image corner, `i`
//!   along columns and `j` along rows. Pixel `(c, r)` covers
//!   `[c, c+1) x [r, r+1)`, so its centre sits at `(c + 0.5, r + 0.5)`.
//! * **image**: millimetres on the sensor plane, origin at the principal
//!   point, axes parallel to the pixel axes.
//!
//! The camera looks straight up. Its only free rotation is the heading
//! `theta` about the vertical axis. The lens inverts the image, which the
//! forward model ([`project_led`]) and the solver ([`position_from_two_leds`])
//! both express through [`inversion_sign`], so that solving a projected pose
//! returns the pose exactly.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("image centroids are {separation} mm apart, below the {min_separation} mm minimum")]
    CoincidentCentroids { separation: f64, min_separation: f64 },
    #[error("beacon heights differ by {dz} cm (max {tolerance} cm)")]
    HeightMismatch { dz: f64, tolerance: f64 },
    #[error("lamp is not above the lens (vertical distance {height} cm)")]
    BehindCamera { height: f64 },
    #[error("beacon pair must be ordered by ascending id, got {first} then {second}")]
    UnorderedPair { first: u32, second: u32 },
    #[error("invalid camera intrinsics: {0}")]
    InvalidIntrinsics(String),
}

/// Point in the world frame, centimetres.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct WorldPoint<T> {
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T: Scalar> WorldPoint<T> {
    pub fn new(x: T, y: T, z: T) -> Self {
        Self { x, y, z }
    }

    pub fn xy(&self) -> Point2<T> {
        Point2::new(self.x, self.y)
    }
}

/// Pixel coordinates, sub-pixel, origin at the image corner.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PixelPoint<T> {
    pub i: T,
    pub j: T,
}

impl<T: Scalar> PixelPoint<T> {
    pub fn new(i: T, j: T) -> Self {
        Self { i, j }
    }

    pub fn distance(&self, other: &Self) -> T {
        (self.i - other.i).hypot(self.j - other.j)
    }
}

/// Sensor-plane coordinates in millimetres relative to the principal point.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ImagePoint<T> {
    pub u: T,
    pub v: T,
}

impl<T: Scalar> ImagePoint<T> {
    pub fn new(u: T, v: T) -> Self {
        Self { u, v }
    }

    pub fn scaled(&self, s: T) -> Self {
        Self::new(self.u * s, self.v * s)
    }
}

/// Plain 2D vector, used for floor-plane offsets and calibration samples.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2<T> {
    pub x: T,
    pub y: T,
}

impl<T: Scalar> Point2<T> {
    pub fn new(x: T, y: T) -> Self {
        Self { x, y }
    }

    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero())
    }

    pub fn add(&self, o: &Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y)
    }

    pub fn sub(&self, o: &Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y)
    }

    pub fn scale(&self, s: T) -> Self {
        Self::new(self.x * s, self.y * s)
    }

    pub fn norm(&self) -> T {
        self.x.hypot(self.y)
    }

    pub fn norm_squared(&self) -> T {
        self.x * self.x + self.y * self.y
    }

    pub fn distance(&self, o: &Self) -> T {
        self.sub(o).norm()
    }

    pub fn midpoint(&self, o: &Self) -> Self {
        Self::new((self.x + o.x) * T::half(), (self.y + o.y) * T::half())
    }

    /// Counter-clockwise rotation by `theta` radians.
    pub fn rotated(&self, theta: T) -> Self {
        let (s, c) = theta.sin_cos();
        Self::new(self.x * c - self.y * s, self.x * s + self.y * c)
    }
}

/// Robot (camera) pose on the floor: position in cm and heading in radians.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose2D<T> {
    pub x: T,
    pub y: T,
    pub theta: T,
}

impl<T: Scalar> Pose2D<T> {
    /// Builds a pose with `theta` wrapped into `(-pi, pi]`.
    pub fn new(x: T, y: T, theta: T) -> Self {
        Self {
            x,
            y,
            theta: normalize_angle(theta),
        }
    }

    pub fn position(&self) -> Point2<T> {
        Point2::new(self.x, self.y)
    }

    /// Planar Euclidean distance between the two positions.
    pub fn distance(&self, other: &Self) -> T {
        self.position().distance(&other.position())
    }
}

/// Vertical distance from the lens centre up to the lamp plane, cm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraHeight<T>(pub T);

impl<T: Scalar> CameraHeight<T> {
    pub fn new(h: T) -> Result<Self, GeometryError> {
        if h > T::zero() && h.is_finite() {
            Ok(Self(h))
        } else {
            Err(GeometryError::BehindCamera {
                height: h.to_f64().unwrap_or(f64::NAN),
            })
        }
    }

    pub fn get(&self) -> T {
        self.0
    }
}

/// Pinhole intrinsics of the upward-looking camera.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraIntrinsics<T> {
    pub width: u32,
    pub height: u32,
    /// Pixel pitch along `i`, mm.
    pub du: T,
    /// Pixel pitch along `j`, mm.
    pub dv: T,
    /// Isotropic pixel pitch, mm. Equal to `du`/`dv` for square pixels.
    pub dl: T,
    pub principal_point: PixelPoint<T>,
    /// Focal length, mm.
    pub focal_length: T,
}

impl<T: Scalar> CameraIntrinsics<T> {
    /// Square-pixel intrinsics with the principal point at the image centre.
    pub fn nominal(width: u32, height: u32, pitch: T, focal_length: T) -> Self {
        Self {
            width,
            height,
            du: pitch,
            dv: pitch,
            dl: pitch,
            principal_point: Self::image_center(width, height),
            focal_length,
        }
    }

    pub fn image_center(width: u32, height: u32) -> PixelPoint<T> {
        PixelPoint::new(
            T::lit(f64::from(width)) * T::half(),
            T::lit(f64::from(height)) * T::half(),
        )
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        let positive = |name: &str, v: T| {
            if v > T::zero() && v.is_finite() {
                Ok(())
            } else {
                Err(GeometryError::InvalidIntrinsics(format!("{name} must be > 0")))
            }
        };
        positive("du", self.du)?;
        positive("dv", self.dv)?;
        positive("dl", self.dl)?;
        positive("focal_length", self.focal_length)?;
        if self.width == 0 || self.height == 0 {
            return Err(GeometryError::InvalidIntrinsics(
                "resolution must be non-zero".into(),
            ));
        }
        if !(self.principal_point.i.is_finite() && self.principal_point.j.is_finite()) {
            return Err(GeometryError::InvalidIntrinsics(
                "principal point must be finite".into(),
            ));
        }
        Ok(())
    }

    /// Same intrinsics with the principal point moved by `(di, dj)` pixels.
    pub fn with_principal_offset(&self, di: T, dj: T) -> Self {
        let mut k = *self;
        k.principal_point = PixelPoint::new(self.principal_point.i + di, self.principal_point.j + dj);
        k
    }

    /// Size of one pixel projected onto the lamp plane, cm.
    pub fn pixel_footprint(&self, h: CameraHeight<T>) -> T {
        self.dl * h.get() / self.focal_length
    }
}

/// Sign relating floor offsets to image offsets. The lens inverts the image:
/// a lamp displaced along `+x` in the camera frame lands at `-u`.
#[inline]
pub fn inversion_sign<T: Scalar>() -> T {
    -T::one()
}

/// Wraps an angle into `(-pi, pi]`.
pub fn normalize_angle<T: Scalar>(theta: T) -> T {
    let pi = T::PI();
    let two_pi = pi + pi;
    let mut a = theta % two_pi;
    if a <= -pi {
        a = a + two_pi;
    } else if a > pi {
        a = a - two_pi;
    }
    a
}

/// Signed smallest difference `a - b`, wrapped into `(-pi, pi]`.
pub fn angle_difference<T: Scalar>(a: T, b: T) -> T {
    normalize_angle(a - b)
}

pub fn pixel_to_image<T: Scalar>(p: PixelPoint<T>, k: &CameraIntrinsics<T>) -> ImagePoint<T> {
    ImagePoint::new(
        (p.i - k.principal_point.i) * k.du,
        (p.j - k.principal_point.j) * k.dv,
    )
}

pub fn image_to_pixel<T: Scalar>(q: ImagePoint<T>, k: &CameraIntrinsics<T>) -> PixelPoint<T> {
    PixelPoint::new(
        k.principal_point.i + q.u / k.du,
        k.principal_point.j + q.v / k.dv,
    )
}

/// Bearing of the image vector from `c2` to `c1`: `atan2(v1 - v2, u1 - u2)`.
pub fn estimate_azimuth<T: Scalar>(
    c1: ImagePoint<T>,
    c2: ImagePoint<T>,
    min_separation: T,
) -> Result<T, GeometryError> {
    let du = c1.u - c2.u;
    let dv = c1.v - c2.v;
    let sep = du.hypot(dv);
    if !(sep >= min_separation) || sep == T::zero() {
        return Err(GeometryError::CoincidentCentroids {
            separation: sep.to_f64().unwrap_or(f64::NAN),
            min_separation: min_separation.to_f64().unwrap_or(f64::NAN),
        });
    }
    Ok(normalize_angle(dv.atan2(du)))
}

/// Rotates a camera-frame point about the vertical axis into the world frame.
pub fn rotate_to_world<T: Scalar>(p: WorldPoint<T>, theta: T) -> WorldPoint<T> {
    let (s, c) = theta.sin_cos();
    WorldPoint::new(p.x * c - p.y * s, p.x * s + p.y * c, p.z)
}

/// Forward pinhole model: where a lamp appears for a given camera pose.
///
/// `camera` is the lens position on the floor plane; `h` the vertical
/// distance from the lens to the lamp.
pub fn project_led<T: Scalar>(
    led: &WorldPoint<T>,
    camera: &Pose2D<T>,
    k: &CameraIntrinsics<T>,
    h: CameraHeight<T>,
) -> Result<PixelPoint<T>, GeometryError> {
    let height = h.get();
    if !(height > T::zero()) {
        return Err(GeometryError::BehindCamera {
            height: height.to_f64().unwrap_or(f64::NAN),
        });
    }
    let offset = led.xy().sub(&camera.position()).rotated(-camera.theta);
    let scale = inversion_sign::<T>() * k.focal_length / height;
    Ok(image_to_pixel(
        ImagePoint::new(offset.x * scale, offset.y * scale),
        k,
    ))
}

/// A lamp with a decoded identity, as seen by the solver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Anchor<T> {
    pub id: u32,
    pub position: WorldPoint<T>,
}

/// Tolerances for [`position_from_two_leds`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairTolerance<T> {
    /// Minimum image separation of the two centroids, in pixels.
    pub min_separation_px: T,
    /// Largest accepted height difference between the two lamps, cm.
    pub max_height_mismatch: T,
}

impl<T: Scalar> Default for PairTolerance<T> {
    fn default() -> Self {
        Self {
            min_separation_px: T::one(),
            max_height_mismatch: T::lit(0.1),
        }
    }
}

/// Solves the camera pose from two identified lamps and their image centroids.
///
/// The heading is the difference between the world bearing of `a - b` and the
/// bearing of the same vector in the (un-inverted) image. The position is the
/// lamp midpoint minus the rotated, similar-triangle-scaled mean image offset.
pub fn position_from_two_leds<T: Scalar>(
    a: &Anchor<T>,
    b: &Anchor<T>,
    ca: ImagePoint<T>,
    cb: ImagePoint<T>,
    k: &CameraIntrinsics<T>,
    h: CameraHeight<T>,
    tol: &PairTolerance<T>,
) -> Result<Pose2D<T>, GeometryError> {
    if a.id >= b.id {
        return Err(GeometryError::UnorderedPair {
            first: a.id,
            second: b.id,
        });
    }
    let dz = (a.position.z - b.position.z).abs();
    if dz > tol.max_height_mismatch {
        return Err(GeometryError::HeightMismatch {
            dz: dz.to_f64().unwrap_or(f64::NAN),
            tolerance: tol.max_height_mismatch.to_f64().unwrap_or(f64::NAN),
        });
    }
    let sigma = inversion_sign::<T>();
    let image_bearing = estimate_azimuth(
        ca.scaled(sigma),
        cb.scaled(sigma),
        tol.min_separation_px * k.dl,
    )?;
    let world = a.position.xy().sub(&b.position.xy());
    let theta = normalize_angle(world.y.atan2(world.x) - image_bearing);

    let scale = sigma * h.get() / k.focal_length;
    let mean_u = (ca.u + cb.u) * T::half();
    let mean_v = (ca.v + cb.v) * T::half();
    let cam_frame = WorldPoint::new(mean_u * scale, mean_v * scale, T::zero());
    let offset = rotate_to_world(cam_frame, theta);
    let mid = a.position.xy().midpoint(&b.position.xy());
    Ok(Pose2D::new(mid.x - offset.x, mid.y - offset.y, theta))
}
