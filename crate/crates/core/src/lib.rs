//! Camera-based visible light positioning.
//!
//! Ceiling lamps broadcast an identity by switching on and off at a
//! lamp-specific frequency. A rolling-shutter camera looking straight up turns
//! that flicker into horizontal stripes, which identify each lamp in the
//! image. With two identified lamps of known position the robot's floor
//! position and heading follow from similar triangles.
//!
//! Pipeline stages:
//!
//! 1. [`scene_sim`]: deterministic rolling-shutter renderer standing in for
//!    the camera and the lamps.
//! 2. [`vision`]: Otsu binarization, connected-component lamp regions and a
//!    Kalman / mean-shift tracker.
//! 3. [`decode`]: stripe period estimation and id classification.
//! 4. [`geometry`]: frame transforms and the two-lamp pose solver.
//! 5. [`calibration`]: principal-point correction by rotation and by
//!    dispersion of repeated fixes.
//! 6. [`pipeline`]: end-to-end localization and the grid experiment with
//!    error statistics.
//!
//! The geometric core is generic over [`Scalar`]; the aliases below fix it to
//! `f64`, which is what the image-processing stages use.

pub mod calibration;
pub mod decode;
pub mod geometry;
pub mod pipeline;
pub mod scalar;
pub mod scenario;
pub mod scene_sim;
pub mod vision;

pub use scalar::Scalar;
pub use scenario::{Platform, Scenario, ScenarioError};
pub use scene_sim::{Frame, FrameMeta, LedFixture, LedId, LedRegistry, NoiseModel, RollingShutterConfig, Scene};

pub type WorldPoint = geometry::WorldPoint<f64>;
pub type PixelPoint = geometry::PixelPoint<f64>;
pub type ImagePoint = geometry::ImagePoint<f64>;
pub type Point2 = geometry::Point2<f64>;
pub type Pose2D = geometry::Pose2D<f64>;
pub type CameraIntrinsics = geometry::CameraIntrinsics<f64>;
pub type CameraHeight = geometry::CameraHeight<f64>;
pub type Circle = calibration::Circle<f64>;
