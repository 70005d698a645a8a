//! Per-lamp tracker: constant-velocity Kalman prediction, binarized
//! mean-shift inside a gate around the prediction, and a measurement noise
//! scaled by histogram similarity.

use nalgebra::{Matrix2, Matrix2x4, Matrix4, Vector2, Vector4};
use serde::{Deserialize, Serialize};

use super::blobs::{measure_window, DetectionConfig, RoiWindow};
use super::VisionError;
use crate::scene_sim::FrameMeta;
use crate::{Frame, PixelPoint};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrackerConfig {
    /// White-noise acceleration variance q, px^2/frame^4.
    pub process_noise: f64,
    /// Base measurement variance R0, px^2.
    pub measurement_noise: f64,
    /// Initial state variance, px^2 (and px^2/frame^2 for velocity).
    pub initial_covariance: f64,
    /// Gate side as a multiple of the window side.
    pub gate_scale: f64,
    pub max_iterations: u32,
    /// Mean-shift stops once a step moves less than this, px.
    pub convergence_px: f64,
    /// Below this Bhattacharyya score the update is skipped.
    pub min_similarity: f64,
    /// Keeps R positive at perfect similarity.
    pub similarity_epsilon: f64,
    pub max_coast: u32,
    pub histogram_bins: usize,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            process_noise: 1.0,
            measurement_noise: 4.0,
            initial_covariance: 25.0,
            gate_scale: 1.5,
            max_iterations: 20,
            convergence_px: 0.5,
            min_similarity: 0.3,
            similarity_epsilon: 0.05,
            max_coast: 5,
            histogram_bins: 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackState {
    /// `(cx, cy, vx, vy)` in px and px/frame.
    pub state: Vector4<f64>,
    pub covariance: Matrix4<f64>,
    /// Normalized intensity histogram of the lamp when the track started.
    pub reference: Vec<f64>,
    pub last_score: f64,
    /// Window size, px.
    pub size: (f64, f64),
    pub threshold: u8,
    pub coasting: u32,
    /// Pixels read from the frame by the last step.
    pub pixels_processed: usize,
}

impl TrackState {
    /// Starts a track on a detected lamp.
    pub fn from_roi(
        roi: &RoiWindow,
        frame: &Frame,
        threshold: u8,
        cfg: &TrackerConfig,
    ) -> Result<Self, VisionError> {
        let window: Vec<u8> = (roi.y..roi.y + roi.h)
            .flat_map(|r| {
                let row = frame.row(r as usize);
                row[roi.x as usize..(roi.x + roi.w) as usize].iter().copied()
            })
            .collect();
        let reference = intensity_histogram(&window, threshold, cfg.histogram_bins)
            .ok_or(VisionError::EmptyHistogram)?;
        let c = roi.center();
        Ok(Self {
            state: Vector4::new(c.i, c.j, 0.0, 0.0),
            covariance: Matrix4::identity() * cfg.initial_covariance,
            reference,
            last_score: 1.0,
            size: (f64::from(roi.w), f64::from(roi.h)),
            threshold,
            coasting: 0,
            pixels_processed: 0,
        })
    }

    pub fn center(&self) -> PixelPoint {
        PixelPoint::new(self.state[0], self.state[1])
    }

    /// Gate the next step will search, as `(x, y, w, h)` clipped to the frame.
    pub fn gate(&self, frame_w: u32, frame_h: u32, cfg: &TrackerConfig) -> (u32, u32, u32, u32) {
        let predicted = transition() * self.state;
        gate_rect(
            PixelPoint::new(predicted[0], predicted[1]),
            (self.size.0 * cfg.gate_scale, self.size.1 * cfg.gate_scale),
            frame_w,
            frame_h,
        )
    }

    fn predict(&mut self, cfg: &TrackerConfig) {
        let f = transition();
        self.state = f * self.state;
        self.covariance = f * self.covariance * f.transpose() + process_noise(cfg.process_noise);
        symmetrize(&mut self.covariance);
    }

    /// Joseph-form Kalman update with a position measurement of variance `r`.
    pub fn update(&mut self, z: PixelPoint, r: f64) {
        let h = Matrix2x4::new(1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0);
        let rm = Matrix2::identity() * r;
        let s = h * self.covariance * h.transpose() + rm;
        let Some(s_inv) = s.try_inverse() else {
            return;
        };
        let k = self.covariance * h.transpose() * s_inv;
        let innovation = Vector2::new(z.i, z.j) - h * self.state;
        self.state += k * innovation;
        let i_kh = Matrix4::identity() - k * h;
        self.covariance = i_kh * self.covariance * i_kh.transpose() + k * rm * k.transpose();
        symmetrize(&mut self.covariance);
    }
}

fn transition() -> Matrix4<f64> {
    Matrix4::new(
        1.0, 0.0, 1.0, 0.0, //
        0.0, 1.0, 0.0, 1.0, //
        0.0, 0.0, 1.0, 0.0, //
        0.0, 0.0, 0.0, 1.0,
    )
}

/// Discrete white-noise acceleration model with unit time step.
fn process_noise(q: f64) -> Matrix4<f64> {
    let (a, b, c) = (0.25 * q, 0.5 * q, q);
    Matrix4::new(
        a, 0.0, b, 0.0, //
        0.0, a, 0.0, b, //
        b, 0.0, c, 0.0, //
        0.0, b, 0.0, c,
    )
}

fn symmetrize(p: &mut Matrix4<f64>) {
    *p = (*p + p.transpose()) * 0.5;
}

fn gate_rect(c: PixelPoint, size: (f64, f64), fw: u32, fh: u32) -> (u32, u32, u32, u32) {
    let x0 = (c.i - size.0 / 2.0).floor().clamp(0.0, f64::from(fw)) as u32;
    let y0 = (c.j - size.1 / 2.0).floor().clamp(0.0, f64::from(fh)) as u32;
    let x1 = (c.i + size.0 / 2.0).ceil().clamp(0.0, f64::from(fw)) as u32;
    let y1 = (c.j + size.1 / 2.0).ceil().clamp(0.0, f64::from(fh)) as u32;
    (x0, y0, x1 - x0, y1 - y0)
}

/// Normalized histogram of the pixels above `threshold`, `bins` equal bins
/// over `0..256`. Each pixel is split linearly between the two nearest bin
/// centres, so a small brightness drift moves mass gradually instead of
/// jumping a bin. `None` when no pixel qualifies.
pub fn intensity_histogram(pixels: &[u8], threshold: u8, bins: usize) -> Option<Vec<f64>> {
    let bins = bins.max(1);
    let width = 256.0 / bins as f64;
    let mut counts = vec![0.0f64; bins];
    let mut n = 0u64;
    for &p in pixels {
        if p > threshold {
            let pos = (f64::from(p) / width - 0.5).clamp(0.0, (bins - 1) as f64);
            let lo = pos.floor() as usize;
            let frac = pos - lo as f64;
            counts[lo] += 1.0 - frac;
            if frac > 0.0 {
                counts[lo + 1] += frac;
            }
            n += 1;
        }
    }
    if n == 0 {
        return None;
    }
    Some(counts.into_iter().map(|c| c / n as f64).collect())
}

/// Bhattacharyya coefficient of two normalized histograms.
pub fn bhattacharyya(p: &[f64], q: &[f64]) -> Result<f64, VisionError> {
    if p.len() != q.len() {
        return Err(VisionError::BinMismatch(p.len(), q.len()));
    }
    for h in [p, q] {
        let s: f64 = h.iter().sum();
        if (s - 1.0).abs() > 1e-9 || h.iter().any(|v| *v < 0.0 || !v.is_finite()) {
            return Err(VisionError::NotNormalized(s));
        }
    }
    let b: f64 = p.iter().zip(q).map(|(a, b)| (a * b).sqrt()).sum();
    Ok(b.clamp(0.0, 1.0))
}

/// Advances a track by one frame.
///
/// Only the gate around the predicted centre is read from `frame`. The
/// returned window is the measured lamp, or the pure prediction when the
/// step coasts.
pub fn track_step(
    state: &TrackState,
    frame: &Frame,
    cfg: &TrackerConfig,
) -> Result<(TrackState, RoiWindow), VisionError> {
    let mut next = state.clone();
    next.predict(cfg);
    let gate = gate_rect(
        next.center(),
        (next.size.0 * cfg.gate_scale, next.size.1 * cfg.gate_scale),
        frame.width(),
        frame.height(),
    );
    let (gx, gy, gw, gh) = gate;
    let mut buf = Vec::with_capacity((gw * gh) as usize);
    for r in gy..gy + gh {
        buf.extend_from_slice(&frame.row(r as usize)[gx as usize..(gx + gw) as usize]);
    }
    next.pixels_processed = buf.len();
    let sub = Frame::new(gw, gh, buf, FrameMeta::default());

    let measured = if gw == 0 || gh == 0 {
        None
    } else {
        locate_in_gate(&sub, &next, cfg, (gx, gy))
    };
    let score = match &measured {
        Some(roi) => {
            let px = window_pixels(&sub, roi);
            match intensity_histogram(&px, next.threshold, cfg.histogram_bins) {
                Some(h) => bhattacharyya(&h, &next.reference)?,
                None => 0.0,
            }
        }
        None => 0.0,
    };
    next.last_score = score;

    match measured {
        Some(mut roi) if score >= cfg.min_similarity => {
            let r = (1.0 - score + cfg.similarity_epsilon) * cfg.measurement_noise;
            roi.x += gx;
            roi.y += gy;
            roi.centroid = shift(roi.centroid, gx, gy);
            if let Some(d) = roi.disc.as_mut() {
                d.center.x += f64::from(gx);
                d.center.y += f64::from(gy);
            }
            next.update(roi.center(), r);
            next.coasting = 0;
            Ok((next, roi))
        }
        _ => {
            next.coasting += 1;
            if next.coasting > cfg.max_coast {
                return Err(VisionError::TrackLost(next.coasting));
            }
            let (x, y, w, h) = gate_rect(next.center(), next.size, frame.width(), frame.height());
            let roi = RoiWindow {
                x,
                y,
                w,
                h,
                centroid: next.center(),
                disc: None,
                area: 0,
            };
            Ok((next, roi))
        }
    }
}

fn shift(p: PixelPoint, dx: u32, dy: u32) -> PixelPoint {
    PixelPoint::new(p.i + f64::from(dx), p.j + f64::from(dy))
}

fn window_pixels(sub: &Frame, roi: &RoiWindow) -> Vec<u8> {
    (roi.y..roi.y + roi.h)
        .flat_map(|r| sub.row(r as usize)[roi.x as usize..(roi.x + roi.w) as usize].iter().copied())
        .collect()
}

/// Mean-shift on the binarized gate, then a disc measurement around the
/// converged window. Coordinates are gate-local.
fn locate_in_gate(
    sub: &Frame,
    st: &TrackState,
    cfg: &TrackerConfig,
    origin: (u32, u32),
) -> Option<RoiWindow> {
    let (w, h) = (sub.width(), sub.height());
    let mut c = (st.state[0] - f64::from(origin.0), st.state[1] - f64::from(origin.1));
    let (mut sxx, mut syy) = (0.0, 0.0);
    let mut found = false;
    for _ in 0..cfg.max_iterations.max(1) {
        let (x0, y0, ww, wh) = gate_rect(PixelPoint::new(c.0, c.1), st.size, w, h);
        let (mut n, mut sx, mut sy, mut qx, mut qy) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for r in y0..y0 + wh {
            let row = sub.row(r as usize);
            let y = f64::from(r) + 0.5;
            for col in x0..x0 + ww {
                if row[col as usize] > st.threshold {
                    let x = f64::from(col) + 0.5;
                    n += 1.0;
                    sx += x;
                    sy += y;
                    qx += x * x;
                    qy += y * y;
                }
            }
        }
        if n == 0.0 {
            break;
        }
        found = true;
        let m = (sx / n, sy / n);
        sxx = (qx / n - m.0 * m.0).max(0.0);
        syy = (qy / n - m.1 * m.1).max(0.0);
        let step = (m.0 - c.0).hypot(m.1 - c.1);
        c = m;
        if step < cfg.convergence_px {
            break;
        }
    }
    if !found {
        return None;
    }
    // A uniform disc of radius R has per-axis variance R^2 / 4.
    let side = (4.0 * sxx.sqrt()).max(4.0 * syy.sqrt()).max(st.size.0.min(st.size.1));
    let window = gate_rect(PixelPoint::new(c.0, c.1), (side + 4.0, side + 4.0), w, h);
    let det = DetectionConfig {
        min_area: 1,
        min_roi_size: 1,
        closing_rows: side.ceil() as usize,
        threshold_smoothing: 0,
    };
    measure_window(sub, window, st.threshold, &det)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bhattacharyya_examples() {
        assert!((bhattacharyya(&[0.25; 4], &[0.25; 4]).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(bhattacharyya(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        let b = bhattacharyya(&[0.5, 0.5], &[1.0, 0.0]).unwrap();
        assert!((b - 0.5f64.sqrt()).abs() < 1e-12);
        assert!(matches!(
            bhattacharyya(&[0.5, 0.6], &[1.0, 0.0]),
            Err(VisionError::NotNormalized(_))
        ));
        assert!(matches!(
            bhattacharyya(&[1.0], &[1.0, 0.0]),
            Err(VisionError::BinMismatch(1, 2))
        ));
    }

    #[test]
    fn histogram_ignores_dark_pixels() {
        let h = intensity_histogram(&[0, 10, 200, 255], 100, 16).unwrap();
        assert_eq!(h.len(), 16);
        assert_eq!(h[12], 0.5);
        assert_eq!(h[15], 0.5);
        let h = intensity_histogram(&[204], 100, 16).unwrap();
        assert_eq!((h[12], h[13]), (0.75, 0.25));
        assert!(intensity_histogram(&[0, 10], 100, 16).is_none());
    }

    #[test]
    fn update_shrinks_position_variance() {
        let mut st = TrackState {
            state: Vector4::zeros(),
            covariance: Matrix4::identity() * 25.0,
            reference: vec![1.0],
            last_score: 1.0,
            size: (10.0, 10.0),
            threshold: 0,
            coasting: 0,
            pixels_processed: 0,
        };
        st.update(PixelPoint::new(1.0, 1.0), 4.0);
        assert!(st.covariance[(0, 0)] < 25.0);
        assert!(st.state[0] > 0.0 && st.state[0] < 1.0);
    }
}
