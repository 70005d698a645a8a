//! TOML run configuration.
//!
//! Every section except `camera` may be omitted and then takes its default.
//! A section that is present must be complete. Unknown keys are rejected.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use vlp_core::calibration::CalibrationConfig;
use vlp_core::decode::DecodeConfig;
use vlp_core::geometry::GeometryError;
use vlp_core::pipeline::GridConfig;
use vlp_core::scene_sim::{RegistryError, SimError, DEFAULT_AMPLITUDE};
use vlp_core::vision::{DetectionConfig, TrackerConfig};
use vlp_core::{
    CameraIntrinsics, LedRegistry, NoiseModel, PixelPoint, Platform, RollingShutterConfig,
    Scenario, ScenarioError,
};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{}: {message}", path.display())]
    Parse { path: PathBuf, message: String },
    #[error("{}{}: {message}", path.display(), line.map(|l| format!(":{l}")).unwrap_or_default())]
    Validation {
        path: PathBuf,
        line: Option<usize>,
        message: String,
    },
    #[error("{}: {source}", path.display())]
    Registry {
        path: PathBuf,
        source: RegistryError,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraSection {
    pub width: u32,
    pub height: u32,
    pub du: f64,
    pub dv: f64,
    pub dl: f64,
    pub focal_length: f64,
    /// Believed principal point `[i, j]`; the image centre when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub principal_point: Option<[f64; 2]>,
    /// Lens height above the floor, cm.
    #[serde(default)]
    pub z: f64,
}

impl CameraSection {
    pub fn intrinsics(&self) -> CameraIntrinsics {
        let pp = self.principal_point.map_or_else(
            || CameraIntrinsics::image_center(self.width, self.height),
            |[i, j]| PixelPoint::new(i, j),
        );
        CameraIntrinsics {
            width: self.width,
            height: self.height,
            du: self.du,
            dv: self.dv,
            dl: self.dl,
            principal_point: pp,
            focal_length: self.focal_length,
        }
    }
}

/// Simulator-only truths the localizer does not know.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSection {
    /// True principal point minus the believed one, px.
    pub principal_point_offset: [f64; 2],
    pub amplitude: f64,
}

impl Default for SimulationSection {
    fn default() -> Self {
        Self {
            principal_point_offset: [10.0, -6.0],
            amplitude: DEFAULT_AMPLITUDE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    /// Master seed of every random draw.
    pub seed: u64,
    /// Lamp registry file, relative to the config file.
    pub registry: PathBuf,
    pub camera: CameraSection,
    #[serde(default)]
    pub simulation: SimulationSection,
    #[serde(default)]
    pub rolling_shutter: RollingShutterConfig,
    #[serde(default)]
    pub noise: NoiseModel,
    #[serde(default)]
    pub platform: Platform,
    #[serde(default = "default_detection")]
    pub detection: DetectionConfig,
    #[serde(default)]
    pub decode: DecodeConfig,
    #[serde(default)]
    pub tracker: TrackerConfig,
    #[serde(default)]
    pub calibration: CalibrationConfig,
    #[serde(default)]
    pub grid: GridConfig,
}

fn default_detection() -> DetectionConfig {
    Scenario::reference().detection
}

/// A parsed config together with the scenario it describes.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub path: PathBuf,
    pub config: Config,
    pub scenario: Scenario,
}

impl Config {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    fn registry_path(&self, config_path: &Path) -> PathBuf {
        if self.registry.is_absolute() {
            self.registry.clone()
        } else {
            config_path
                .parent()
                .unwrap_or_else(|| Path::new("."))
                .join(&self.registry)
        }
    }

    pub fn scenario(&self, registry: LedRegistry) -> Scenario {
        Scenario {
            camera: self.camera.intrinsics(),
            principal_point_offset: self.simulation.principal_point_offset,
            camera_z: self.camera.z,
            rolling_shutter: self.rolling_shutter,
            registry,
            noise: self.noise,
            amplitude: self.simulation.amplitude,
            platform: self.platform,
            detection: self.detection,
            decode: self.decode,
            tracker: self.tracker,
            calibration: self.calibration,
            grid: self.grid,
        }
    }
}

/// Reads, parses and validates a config and the registry it names.
pub fn parse_config(path: &Path) -> Result<Loaded, ConfigError> {
    let src = fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config_str(&src, path)
}

/// As [`parse_config`], with the text already in hand. `path` locates the
/// registry and labels diagnostics.
pub fn parse_config_str(src: &str, path: &Path) -> Result<Loaded, ConfigError> {
    let config: Config = toml::from_str(src).map_err(|e| ConfigError::Parse {
        path: path.to_path_buf(),
        message: e.to_string().trim_end().to_string(),
    })?;
    let reg_path = config.registry_path(path);
    let reg_src = fs::read_to_string(&reg_path).map_err(|source| ConfigError::Io {
        path: reg_path.clone(),
        source,
    })?;
    let registry = LedRegistry::parse(&reg_src).map_err(|source| ConfigError::Registry {
        path: reg_path.clone(),
        source,
    })?;
    let scenario = config.scenario(registry);
    scenario.validate().map_err(|e| {
        let (section, key) = blame(&e);
        ConfigError::Validation {
            path: path.to_path_buf(),
            line: find_key_line(src, section, key.as_deref()),
            message: e.to_string(),
        }
    })?;
    Ok(Loaded {
        path: path.to_path_buf(),
        config,
        scenario,
    })
}

/// Section and key responsible for a validation error, when known.
fn blame(e: &ScenarioError) -> (Option<&'static str>, Option<String>) {
    let first_word = |m: &str| m.split_whitespace().next().map(str::to_string);
    match e {
        ScenarioError::Geometry(GeometryError::InvalidIntrinsics(m)) => (Some("camera"), first_word(m)),
        ScenarioError::Geometry(_) => (Some("camera"), None),
        ScenarioError::Sim(SimError::InvalidNoise(m)) => (Some("noise"), first_word(m)),
        ScenarioError::Sim(SimError::InvalidShutter(m)) => (Some("rolling_shutter"), first_word(m)),
        ScenarioError::Sim(SimError::Geometry(_)) => (Some("camera"), None),
        ScenarioError::Invalid { field, .. } => match field.split_once('.') {
            Some((s, k)) => (Some(section_name(s)), Some(k.to_string())),
            None if *field == "amplitude" => (Some("simulation"), Some("amplitude".into())),
            None => (Some(section_name(field)), None),
        },
        ScenarioError::OutsidePlatform { .. } | ScenarioError::TooFewVisible { .. } => {
            (Some("grid"), None)
        }
        ScenarioError::EmptyRegistry => (None, Some("registry".into())),
    }
}

fn section_name(s: &str) -> &'static str {
    match s {
        "platform" => "platform",
        "decode" => "decode",
        "tracker" => "tracker",
        "calibration" => "calibration",
        "grid" => "grid",
        "detection" => "detection",
        _ => "simulation",
    }
}

/// 1-based line of `key` inside `[section]` (or at top level), falling back
/// to the section header.
pub fn find_key_line(src: &str, section: Option<&str>, key: Option<&str>) -> Option<usize> {
    let mut current: Option<String> = None;
    let mut header = None;
    for (n, raw) in src.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            current = Some(name.trim().to_string());
            if Some(name.trim()) == section {
                header = Some(n + 1);
            }
            continue;
        }
        if current.as_deref() != section {
            continue;
        }
        if let (Some(k), Some((lhs, _))) = (key, line.split_once('=')) {
            if lhs.trim() == k {
                return Some(n + 1);
            }
        }
    }
    header
}
