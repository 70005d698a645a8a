//! A complete simulated setup: the true camera, the believed camera, the
//! lamps, noise, and the experiment and calibration protocols.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calibration::CalibrationConfig;
use crate::decode::DecodeConfig;
use crate::geometry::GeometryError;
use crate::pipeline::{GridConfig, Localizer};
use crate::scene_sim::{disc_projection, SimError};
use crate::vision::{DetectionConfig, TrackerConfig};
use crate::{
    CameraHeight, CameraIntrinsics, LedRegistry, NoiseModel, Pose2D, RollingShutterConfig, Scene,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("registry has no lamps")]
    EmptyRegistry,
    #[error("pose ({x}, {y}) lies outside the platform [{x_min}, {x_max}] x [{y_min}, {y_max}]")]
    OutsidePlatform {
        x: f64,
        y: f64,
        x_min: f64,
        x_max: f64,
        y_min: f64,
        y_max: f64,
    },
    #[error("only {visible} lamp(s) fully in view from grid point ({x}, {y}); need 2")]
    TooFewVisible { x: f64, y: f64, visible: usize },
    #[error("invalid {field}: {message}")]
    Invalid { field: &'static str, message: String },
}

/// Rectangular floor area the robot moves on, cm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Platform {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Default for Platform {
    fn default() -> Self {
        Self {
            x_min: 13.0,
            x_max: 159.0,
            y_min: 13.0,
            y_max: 159.0,
        }
    }
}

impl Platform {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        (self.x_min..=self.x_max).contains(&x) && (self.y_min..=self.y_max).contains(&y)
    }

    fn validate(&self) -> Result<(), ScenarioError> {
        if !(self.x_min < self.x_max && self.y_min < self.y_max)
            || ![self.x_min, self.x_max, self.y_min, self.y_max].iter().all(|v| v.is_finite())
        {
            return Err(ScenarioError::Invalid {
                field: "platform",
                message: "bounds must be finite with min < max".into(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    /// Intrinsics the localizer starts from (principal point at the centre).
    pub camera: CameraIntrinsics,
    /// True principal point minus the believed one, px.
    pub principal_point_offset: [f64; 2],
    /// Height of the lens above the floor, cm.
    pub camera_z: f64,
    pub rolling_shutter: RollingShutterConfig,
    pub registry: LedRegistry,
    pub noise: NoiseModel,
    /// Peak brightness of an on-axis lamp above background, gray levels.
    pub amplitude: f64,
    pub platform: Platform,
    pub detection: DetectionConfig,
    pub decode: DecodeConfig,
    pub tracker: TrackerConfig,
    pub calibration: CalibrationConfig,
    pub grid: GridConfig,
}

impl Default for Scenario {
    fn default() -> Self {
        Self::reference()
    }
}

impl Scenario {
    /// The reference platform: 2048 x 1536 camera with 5 um pixels and a
    /// 4 mm lens, three lamps 285 cm above it, and a principal point that is
    /// off by (+10, -6) px.
    pub fn reference() -> Self {
        let registry = LedRegistry::reference();
        let rolling_shutter = RollingShutterConfig::default();
        let detection = DetectionConfig {
            closing_rows: registry
                .max_stripe_period_rows(rolling_shutter.row_readout_s())
                .ceil() as usize
                + 1,
            ..DetectionConfig::default()
        };
        Self {
            camera: CameraIntrinsics::nominal(2048, 1536, 0.005, 4.0),
            principal_point_offset: [10.0, -6.0],
            camera_z: 0.0,
            rolling_shutter,
            registry,
            noise: NoiseModel::default(),
            amplitude: crate::scene_sim::DEFAULT_AMPLITUDE,
            platform: Platform::default(),
            detection,
            decode: DecodeConfig::default(),
            tracker: TrackerConfig::default(),
            calibration: CalibrationConfig::default(),
            grid: GridConfig::default(),
        }
    }

    /// Same scenario without pixel noise, jitter, axis eccentricity or
    /// principal-point error.
    pub fn noiseless(mut self) -> Self {
        self.noise = NoiseModel {
            seed: self.noise.seed,
            ..NoiseModel::zero()
        };
        self.principal_point_offset = [0.0, 0.0];
        self
    }

    pub fn height(&self) -> Result<CameraHeight, ScenarioError> {
        let z = self.registry.ceiling_height().ok_or(ScenarioError::EmptyRegistry)?;
        Ok(CameraHeight::new(z - self.camera_z)?)
    }

    /// The camera as it really is.
    pub fn true_intrinsics(&self) -> CameraIntrinsics {
        self.camera
            .with_principal_offset(self.principal_point_offset[0], self.principal_point_offset[1])
    }

    pub fn scene(&self) -> Result<Scene, ScenarioError> {
        Ok(Scene::new(
            self.registry.clone(),
            self.true_intrinsics(),
            self.height()?,
            self.rolling_shutter,
            self.noise,
        )?
        .with_amplitude(self.amplitude))
    }

    /// Localizer that believes the given intrinsics.
    pub fn localizer(&self, intrinsics: CameraIntrinsics) -> Result<Localizer, ScenarioError> {
        Ok(Localizer {
            registry: self.registry.clone(),
            intrinsics,
            height: self.height()?,
            rolling_shutter: self.rolling_shutter,
            detection: self.detection,
            decode: self.decode,
            tracker: self.tracker,
        })
    }

    pub fn check_pose(&self, pose: &Pose2D) -> Result<(), ScenarioError> {
        let p = &self.platform;
        if p.contains(pose.x, pose.y) {
            Ok(())
        } else {
            Err(ScenarioError::OutsidePlatform {
                x: pose.x,
                y: pose.y,
                x_min: p.x_min,
                x_max: p.x_max,
                y_min: p.y_min,
                y_max: p.y_max,
            })
        }
    }

    /// Lamps whose whole disc stays inside the true frame from `(x, y)` at
    /// every heading.
    pub fn visible_at_any_heading(&self, x: f64, y: f64) -> Result<usize, ScenarioError> {
        let k = self.true_intrinsics();
        let h = self.height()?;
        let pose = Pose2D::new(x, y, 0.0);
        let mut n = 0;
        for f in self.registry.fixtures() {
            let (c, r) = disc_projection(f, &pose, &k, h)?;
            let reach = (c.i - k.principal_point.i).hypot(c.j - k.principal_point.j) + r + 1.0;
            let room = k
                .principal_point
                .i
                .min(f64::from(k.width) - k.principal_point.i)
                .min(k.principal_point.j)
                .min(f64::from(k.height) - k.principal_point.j);
            if reach <= room {
                n += 1;
            }
        }
        Ok(n)
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        self.camera.validate()?;
        self.true_intrinsics().validate()?;
        self.rolling_shutter.validate()?;
        self.noise.validate()?;
        self.platform.validate()?;
        if self.registry.is_empty() {
            return Err(ScenarioError::EmptyRegistry);
        }
        self.height()?;
        let positive = |field, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(ScenarioError::Invalid {
                    field,
                    message: format!("must be > 0, got {v}"),
                })
            }
        };
        positive("amplitude", self.amplitude)?;
        positive("decode.tolerance_ratio", self.decode.tolerance_ratio - 1.0)?;
        positive("decode.profile_fraction", self.decode.profile_fraction)?;
        positive("tracker.gate_scale", self.tracker.gate_scale)?;
        if self.calibration.dispersion_fixes == 0 {
            return Err(ScenarioError::Invalid {
                field: "calibration.dispersion_fixes",
                message: "must be >= 1".into(),
            });
        }
        if self.calibration.rotation_captures < 3 {
            return Err(ScenarioError::Invalid {
                field: "calibration.rotation_captures",
                message: "must be >= 3".into(),
            });
        }
        if self.registry.get(self.calibration.rotation_led).is_none() {
            return Err(ScenarioError::Invalid {
                field: "calibration.rotation_led",
                message: format!("no lamp with id {}", self.calibration.rotation_led),
            });
        }
        self.grid.validate()?;
        for (x, y) in self.grid.positions() {
            self.check_pose(&Pose2D::new(x, y, 0.0))?;
            let visible = self.visible_at_any_heading(x, y)?;
            if visible < 2 {
                return Err(ScenarioError::TooFewVisible { x, y, visible });
            }
        }
        Ok(())
    }
}
