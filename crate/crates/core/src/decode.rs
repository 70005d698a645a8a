//! Lamp identification from stripe period.
//!
//! Each lamp blinks at its own frequency, so its disc carries stripes with a
//! lamp-specific period in rows. The period is read off the autocorrelation
//! of the disc's row profile and matched to the registry in log-period space.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::pixel_to_image;
use crate::vision::RoiWindow;
use crate::{CameraIntrinsics, Frame, ImagePoint, LedId, LedRegistry, PixelPoint, RollingShutterConfig, WorldPoint};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DecodeError {
    #[error("region is {height} rows tall, need at least {needed}")]
    RoiTooSmall { height: u32, needed: u32 },
    #[error("no stripe periodicity (confidence {confidence:.3})")]
    NoPeriodicity { confidence: f64 },
    #[error("no registered lamp matches {0}")]
    UnknownId(String),
    #[error("period {period:.2} rows is equally close to lamps {first} and {second}")]
    AmbiguousId { period: f64, first: LedId, second: LedId },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecodeConfig {
    /// Smallest accepted autocorrelation peak.
    pub min_confidence: f64,
    /// Largest accepted ratio between measured and expected period.
    pub tolerance_ratio: f64,
    /// Two candidates whose log distances differ by less than this fraction
    /// are ambiguous.
    pub ambiguity: f64,
    /// Fraction of each row's chord used for the profile.
    pub profile_fraction: f64,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        Self {
            min_confidence: 0.4,
            tolerance_ratio: 1.12,
            ambiguity: 0.01,
            profile_fraction: 0.6,
        }
    }
}

/// Mean intensity of each row of a lamp region, top to bottom.
#[derive(Debug, Clone, PartialEq)]
pub struct StripeProfile {
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeriodEstimate {
    pub period_rows: f64,
    pub confidence: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecodedLed {
    pub id: LedId,
    pub world: WorldPoint,
    pub pixel_centroid: PixelPoint,
    pub image_centroid: ImagePoint,
    pub period: PeriodEstimate,
}

/// Row profile of `roi`. Each row averages the central `fraction` of the
/// disc's chord at that row (of the window width when no disc was fitted).
pub fn column_profile(
    frame: &Frame,
    roi: &RoiWindow,
    max_period_rows: f64,
    fraction: f64,
) -> Result<StripeProfile, DecodeError> {
    let needed = (2.0 * max_period_rows).ceil() as u32;
    if roi.h < needed {
        return Err(DecodeError::RoiTooSmall {
            height: roi.h,
            needed,
        });
    }
    let fw = frame.width() as f64;
    let mut values = Vec::with_capacity(roi.h as usize);
    for r in roi.y..roi.y + roi.h {
        let (center, half) = match roi.disc {
            Some(d) => {
                let dy = f64::from(r) + 0.5 - d.center.y;
                let chord = (d.radius * d.radius - dy * dy).max(0.0).sqrt();
                (d.center.x, chord * fraction)
            }
            None => (
                f64::from(roi.x) + f64::from(roi.w) / 2.0,
                f64::from(roi.w) / 2.0 * fraction,
            ),
        };
        let c0 = (center - half).floor().clamp(0.0, fw - 1.0) as usize;
        let c1 = ((center + half).ceil().clamp(1.0, fw) as usize).max(c0 + 1);
        let row = &frame.row(r as usize)[c0..c1];
        values.push(row.iter().map(|&v| f64::from(v)).sum::<f64>() / row.len() as f64);
    }
    Ok(StripeProfile { values })
}

/// Period of the first dominant autocorrelation peak past the first zero
/// crossing, refined to sub-row precision from the peak and its neighbours.
pub fn estimate_stripe_period(
    p: &StripeProfile,
    min_confidence: f64,
) -> Result<PeriodEstimate, DecodeError> {
    let n = p.values.len();
    let none = DecodeError::NoPeriodicity { confidence: 0.0 };
    if n < 4 {
        return Err(none);
    }
    let mean = p.values.iter().sum::<f64>() / n as f64;
    let x: Vec<f64> = p.values.iter().map(|v| v - mean).collect();
    let energy = x.iter().map(|v| v * v).sum::<f64>() / n as f64;
    if energy <= f64::EPSILON {
        return Err(none);
    }
    let max_lag = n / 2;
    // unbiased normalized autocorrelation, lags 0..=max_lag+1
    let r: Vec<f64> = (0..=(max_lag + 1).min(n - 1))
        .map(|k| {
            let s: f64 = x[..n - k].iter().zip(&x[k..]).map(|(a, b)| a * b).sum();
            s / (n - k) as f64 / energy
        })
        .collect();
    let Some(zero) = (1..=max_lag).find(|&k| r[k] < 0.0) else {
        return Err(none);
    };
    let is_peak = |k: usize| k + 1 < r.len() && r[k] > 0.0 && r[k] >= r[k - 1] && r[k] >= r[k + 1];
    let peaks: Vec<usize> = (zero + 1..=max_lag).filter(|&k| is_peak(k)).collect();
    let Some(top) = peaks.iter().map(|&k| r[k]).reduce(f64::max) else {
        return Err(none);
    };
    let k = *peaks
        .iter()
        .find(|&&k| r[k] >= 0.5 * top)
        .expect("top is attained");
    // The autocorrelation of a square wave peaks in a symmetric V, so the
    // vertex is found by matching slopes on both sides.
    let (a, b, c) = (r[k - 1], r[k], r[k + 1]);
    let drop = b - a.min(c);
    let offset = if drop > 0.0 {
        (0.5 * (c - a) / drop).clamp(-0.5, 0.5)
    } else {
        0.0
    };
    let confidence = b.clamp(0.0, 1.0);
    if confidence < min_confidence {
        return Err(DecodeError::NoPeriodicity { confidence });
    }
    Ok(PeriodEstimate {
        period_rows: k as f64 + offset,
        confidence,
    })
}

/// Nearest registered lamp in `|ln(measured / expected)|`.
pub fn classify_id(
    est: &PeriodEstimate,
    registry: &LedRegistry,
    rs: &RollingShutterConfig,
    cfg: &DecodeConfig,
) -> Result<LedId, DecodeError> {
    let row_s = rs.row_readout_s();
    let mut d: Vec<(f64, LedId)> = registry
        .fixtures()
        .iter()
        .map(|f| ((est.period_rows / f.stripe_period_rows(row_s)).ln().abs(), f.id))
        .collect();
    d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let Some(&(best, id)) = d.first() else {
        return Err(DecodeError::UnknownId("an empty registry".into()));
    };
    if let Some(&(second, other)) = d.get(1) {
        if second - best <= cfg.ambiguity * second {
            return Err(DecodeError::AmbiguousId {
                period: est.period_rows,
                first: id,
                second: other,
            });
        }
    }
    if best > cfg.tolerance_ratio.ln() {
        return Err(DecodeError::UnknownId(format!(
            "a stripe period of {:.2} rows",
            est.period_rows
        )));
    }
    Ok(id)
}

pub fn lookup_world(id: LedId, registry: &LedRegistry) -> Result<WorldPoint, DecodeError> {
    registry
        .get(id)
        .map(|f| f.position)
        .ok_or_else(|| DecodeError::UnknownId(format!("id {id}")))
}

/// Profile, period, id and position of one lamp region.
pub fn decode_roi(
    frame: &Frame,
    roi: &RoiWindow,
    registry: &LedRegistry,
    k: &CameraIntrinsics,
    rs: &RollingShutterConfig,
    cfg: &DecodeConfig,
) -> Result<DecodedLed, DecodeError> {
    let max_period = registry.max_stripe_period_rows(rs.row_readout_s());
    let profile = column_profile(frame, roi, max_period, cfg.profile_fraction)?;
    let period = estimate_stripe_period(&profile, cfg.min_confidence)?;
    let id = classify_id(&period, registry, rs, cfg)?;
    let world = lookup_world(id, registry)?;
    let pixel_centroid = roi.center();
    Ok(DecodedLed {
        id,
        world,
        pixel_centroid,
        image_centroid: pixel_to_image(pixel_centroid, k),
        period,
    })
}
