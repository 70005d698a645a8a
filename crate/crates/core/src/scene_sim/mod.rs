//! Synthetic rolling-shutter camera.
//!
//! Each sensor row is sampled at its own instant, so an on-off keyed lamp
//! shows up as a disc of horizontal bright and dark stripes whose period in
//! rows is `1 / (f * row_readout)`. Rows are treated as instantaneous: the
//! configured exposure is far shorter than any half-period, so a row is
//! either fully lit or fully dark.

mod frame;
mod registry;

pub use frame::{Frame, FrameMeta, PgmError};
pub use registry::{
    LedFixture, LedId, LedRegistry, RegistryError, MAX_HEIGHT_SPREAD, MIN_FREQUENCY_RATIO,
};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal as NormalCdf};
use thiserror::Error;

use crate::geometry::{project_led, GeometryError};
use crate::{CameraHeight, CameraIntrinsics, PixelPoint, Pose2D};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("invalid rolling-shutter config: {0}")]
    InvalidShutter(String),
    #[error("invalid noise model: {0}")]
    InvalidNoise(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RollingShutterConfig {
    /// Exposure per row, ms.
    pub exposure_ms: f64,
    /// Interval between consecutive row starts, microseconds.
    pub row_readout_us: f64,
    /// Time at which row 0 is sampled, seconds.
    pub frame_start_s: f64,
}

impl Default for RollingShutterConfig {
    fn default() -> Self {
        Self {
            exposure_ms: 0.02,
            row_readout_us: 25.0,
            frame_start_s: 0.0,
        }
    }
}

impl RollingShutterConfig {
    pub fn row_readout_s(&self) -> f64 {
        self.row_readout_us * 1e-6
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.exposure_ms > 0.0 && self.exposure_ms.is_finite()) {
            return Err(SimError::InvalidShutter("exposure_ms must be > 0".into()));
        }
        if !(self.row_readout_us > 0.0 && self.row_readout_us.is_finite()) {
            return Err(SimError::InvalidShutter("row_readout_us must be > 0".into()));
        }
        if !(self.frame_start_s >= 0.0 && self.frame_start_s.is_finite()) {
            return Err(SimError::InvalidShutter("frame_start_s must be >= 0".into()));
        }
        Ok(())
    }
}

/// Stand-in for the hardware error sources of a real capture.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseModel {
    /// Additive per-pixel Gaussian noise, gray levels.
    pub gaussian_sigma: f64,
    /// Gaussian jitter added to measured lamp centroids during evaluation, px.
    pub centroid_jitter_sigma: f64,
    /// Dark level of the sensor, gray levels.
    pub background_level: f64,
    /// Offset of the rotation axis from the lens centre while the camera is
    /// turned in place for the rotation calibration, cm in the camera frame.
    #[serde(default)]
    pub rotation_axis_offset: [f64; 2],
    pub seed: u64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self {
            gaussian_sigma: 5.0,
            centroid_jitter_sigma: 1.5,
            background_level: 20.0,
            rotation_axis_offset: [1.0, -0.8],
            seed: 0,
        }
    }
}

impl NoiseModel {
    /// No pixel noise, no jitter, ideal rotation axis.
    pub fn zero() -> Self {
        Self {
            gaussian_sigma: 0.0,
            centroid_jitter_sigma: 0.0,
            background_level: 20.0,
            rotation_axis_offset: [0.0, 0.0],
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.gaussian_sigma >= 0.0 && self.gaussian_sigma.is_finite()) {
            return Err(SimError::InvalidNoise("gaussian_sigma must be >= 0".into()));
        }
        if !(self.centroid_jitter_sigma >= 0.0 && self.centroid_jitter_sigma.is_finite()) {
            return Err(SimError::InvalidNoise("centroid_jitter_sigma must be >= 0".into()));
        }
        if !(0.0..=255.0).contains(&self.background_level) {
            return Err(SimError::InvalidNoise("background_level must lie in [0, 255]".into()));
        }
        if !self.rotation_axis_offset.iter().all(|v| v.is_finite()) {
            return Err(SimError::InvalidNoise("rotation_axis_offset must be finite".into()));
        }
        Ok(())
    }
}

/// On/off state of a lamp at time `t`: 50 % duty square wave, on at `t = 0`.
///
/// Phases within 1e-9 of a switching instant count as that instant, so row
/// times that land exactly on an edge are not at the mercy of rounding.
pub fn led_waveform(fixture: &LedFixture, t: f64) -> bool {
    let x = 2.0 * fixture.mod_frequency * t;
    let snapped = if (x - x.round()).abs() < 1e-9 { x.round() } else { x.floor() };
    snapped.rem_euclid(2.0) == 0.0
}

/// Projected centre and radius (px) of a lamp's luminous disc.
pub fn disc_projection(
    fixture: &LedFixture,
    camera: &Pose2D,
    k: &CameraIntrinsics,
    h: CameraHeight,
) -> Result<(PixelPoint, f64), GeometryError> {
    let center = project_led(&fixture.position, camera, k, h)?;
    let radius_px = k.focal_length * fixture.radius / (h.get() * k.dl);
    Ok((center, radius_px))
}

/// Relative Lambertian intensity `cos^m(phi)` seen from the camera.
pub fn lambertian_gain(fixture: &LedFixture, camera: &Pose2D, h: CameraHeight) -> f64 {
    let horizontal = fixture.position.xy().distance(&camera.position());
    let cos_phi = h.get() / h.get().hypot(horizontal);
    cos_phi.powf(fixture.lambertian_order())
}

pub const DEFAULT_AMPLITUDE: f64 = 200.0;
const DEFAULT_SUPERSAMPLE: u32 = 8;

/// Everything needed to render frames of one physical setup.
///
/// `intrinsics` are the camera's *true* parameters; a miscalibrated
/// principal point is modelled by giving the renderer different intrinsics
/// than the localizer.
#[derive(Debug, Clone)]
pub struct Scene {
    pub registry: LedRegistry,
    pub intrinsics: CameraIntrinsics,
    pub height: CameraHeight,
    pub rolling_shutter: RollingShutterConfig,
    pub noise: NoiseModel,
    /// Peak brightness above background of an on-axis lamp, gray levels.
    pub amplitude: f64,
    /// Sub-samples per axis used to anti-alias disc edges.
    pub supersample: u32,
    background: Option<Vec<u8>>,
}

impl Scene {
    pub fn new(
        registry: LedRegistry,
        intrinsics: CameraIntrinsics,
        height: CameraHeight,
        rolling_shutter: RollingShutterConfig,
        noise: NoiseModel,
    ) -> Result<Self, SimError> {
        intrinsics.validate()?;
        rolling_shutter.validate()?;
        noise.validate()?;
        let background = background_sampler(noise.background_level, noise.gaussian_sigma);
        Ok(Self {
            registry,
            intrinsics,
            height,
            rolling_shutter,
            noise,
            amplitude: DEFAULT_AMPLITUDE,
            supersample: DEFAULT_SUPERSAMPLE,
            background,
        })
    }

    pub fn with_amplitude(mut self, amplitude: f64) -> Self {
        self.amplitude = amplitude;
        self
    }

    /// Renders the frame seen from `camera` with row 0 sampled at
    /// `frame_start_s`. Identical arguments give byte-identical frames.
    pub fn render(&self, camera: &Pose2D, frame_start_s: f64, seed: u64) -> Frame {
        let k = &self.intrinsics;
        let (w, h) = (k.width as usize, k.height as usize);
        let row_s = self.rolling_shutter.row_readout_s();
        let bg = self.noise.background_level;

        // Lit pixels as (index, brightness above background), in raster order per lamp.
        let mut lit: Vec<(usize, f64)> = Vec::new();
        for fixture in self.registry.fixtures() {
            let Ok((c, r)) = disc_projection(fixture, camera, k, self.height) else {
                continue;
            };
            let level = self.amplitude * lambertian_gain(fixture, camera, self.height);
            let row0 = (c.j - r - 1.0).floor().max(0.0) as usize;
            let row1 = ((c.j + r + 1.0).ceil().max(0.0) as usize).min(h);
            let col0 = (c.i - r - 1.0).floor().max(0.0) as usize;
            let col1 = ((c.i + r + 1.0).ceil().max(0.0) as usize).min(w);
            for row in row0..row1 {
                if !led_waveform(fixture, frame_start_s + row as f64 * row_s) {
                    continue;
                }
                for col in col0..col1 {
                    let cov = pixel_coverage(col, row, c, r, self.supersample);
                    if cov > 0.0 {
                        lit.push((row * w + col, level * cov));
                    }
                }
            }
        }
        lit.sort_by_key(|&(idx, _)| idx);
        lit.dedup_by(|b, a| {
            if a.0 == b.0 {
                a.1 += b.1;
                true
            } else {
                false
            }
        });

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pixels = match &self.background {
            Some(table) => {
                let mut raw = vec![0u16; w * h];
                rng.fill(&mut raw[..]);
                raw.into_iter().map(|u| table[usize::from(u)]).collect()
            }
            None => vec![quantize(bg); w * h],
        };
        if self.noise.gaussian_sigma > 0.0 {
            let normal = Normal::new(0.0, self.noise.gaussian_sigma).expect("sigma validated");
            for &(idx, extra) in &lit {
                pixels[idx] = quantize(bg + extra + normal.sample(&mut rng));
            }
        } else {
            for &(idx, extra) in &lit {
                pixels[idx] = quantize(bg + extra);
            }
        }
        Frame::new(
            k.width,
            k.height,
            pixels,
            FrameMeta {
                frame_start_s,
                ground_truth: Some(*camera),
                seed,
            },
        )
    }

    /// Renders with a frame start drawn uniformly from `[0, 1)` s, so the
    /// stripe phase is unrelated between frames.
    pub fn render_random_phase<R: Rng>(&self, camera: &Pose2D, rng: &mut R) -> Frame {
        let start: f64 = rng.random();
        let seed: u64 = rng.random();
        self.render(camera, start, seed)
    }
}

/// Renders one frame using the shutter's `frame_start_s` and the noise
/// model's seed.
pub fn render_frame(
    registry: &LedRegistry,
    camera: &Pose2D,
    k: &CameraIntrinsics,
    rs: &RollingShutterConfig,
    noise: &NoiseModel,
    h: CameraHeight,
) -> Result<Frame, SimError> {
    let scene = Scene::new(registry.clone(), *k, h, *rs, *noise)?;
    Ok(scene.render(camera, rs.frame_start_s, noise.seed))
}

#[inline]
fn quantize(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

/// Fraction of pixel `(col, row)` covered by the disc.
fn pixel_coverage(col: usize, row: usize, c: PixelPoint, r: f64, ss: u32) -> f64 {
    const HALF_DIAG: f64 = std::f64::consts::FRAC_1_SQRT_2;
    let dx = col as f64 + 0.5 - c.i;
    let dy = row as f64 + 0.5 - c.j;
    let d = dx.hypot(dy);
    if d <= r - HALF_DIAG {
        return 1.0;
    }
    if d >= r + HALF_DIAG {
        return 0.0;
    }
    let step = 1.0 / f64::from(ss);
    let r2 = r * r;
    let mut inside = 0u32;
    for a in 0..ss {
        let y = row as f64 + (f64::from(a) + 0.5) * step - c.j;
        for b in 0..ss {
            let x = col as f64 + (f64::from(b) + 0.5) * step - c.i;
            if x * x + y * y <= r2 {
                inside += 1;
            }
        }
    }
    f64::from(inside) / f64::from(ss * ss)
}

/// Inverse-CDF table of `clamp(round(level + N(0, sigma)))` over 0..=255,
/// indexed by a uniform 16-bit value. Probabilities are resolved to 2^-16.
fn background_sampler(level: f64, sigma: f64) -> Option<Vec<u8>> {
    if sigma <= 0.0 {
        return None;
    }
    let n = NormalCdf::new(level, sigma).ok()?;
    let mut table = Vec::with_capacity(1 << 16);
    let mut k = 0usize;
    for u in 0..(1u32 << 16) {
        let q = (f64::from(u) + 0.5) / 65536.0;
        while k < 255 && n.cdf(k as f64 + 0.5) < q {
            k += 1;
        }
        table.push(k as u8);
    }
    Some(table)
}
