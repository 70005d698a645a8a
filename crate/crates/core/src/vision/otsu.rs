use num_rational::Ratio;

use super::VisionError;
use crate::Frame;

/// 256-bin gray-level histogram.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayHistogram {
    counts: [u64; 256],
}

impl GrayHistogram {
    pub fn from_counts(counts: [u64; 256]) -> Self {
        Self { counts }
    }

    pub fn from_frame(frame: &Frame) -> Self {
        Self::from_pixels(frame.pixels())
    }

    pub fn from_pixels(pixels: &[u8]) -> Self {
        let mut counts = [0u64; 256];
        for &p in pixels {
            counts[p as usize] += 1;
        }
        Self { counts }
    }

    /// Histogram of the frame after a horizontal box mean over
    /// `2 * radius + 1` columns (rounded, clipped at the row ends).
    ///
    /// Lamp stripes run along rows, so this averages pixel noise without
    /// blurring them. On a mostly dark frame it keeps the background's noise
    /// spread from outscoring the small lit class.
    pub fn from_frame_row_smoothed(frame: &Frame, radius: u32) -> Self {
        if radius == 0 {
            return Self::from_frame(frame);
        }
        let w = frame.width() as usize;
        let r = radius as usize;
        let span = 2 * r + 1;
        // rounded mean of a full window, indexed by the window sum
        let full: Vec<u8> = (0..=255 * span).map(|s| ((s + span / 2) / span) as u8).collect();
        let mut counts = [0u64; 256];
        let mut prefix = vec![0u32; w + 1];
        for y in 0..frame.height() as usize {
            let row = frame.row(y);
            for (x, &v) in row.iter().enumerate() {
                prefix[x + 1] = prefix[x] + u32::from(v);
            }
            for x in 0..w {
                let (a, b) = (x.saturating_sub(r), (x + r + 1).min(w));
                let sum = (prefix[b] - prefix[a]) as usize;
                let mean = if b - a == span {
                    full[sum]
                } else {
                    ((sum + (b - a) / 2) / (b - a)) as u8
                };
                counts[usize::from(mean)] += 1;
            }
        }
        Self { counts }
    }

    pub fn counts(&self) -> &[u64; 256] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Result of Otsu's method. Foreground is `value > threshold`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OtsuThreshold {
    pub threshold: u8,
    /// All mass sits at one gray level; `threshold` is that level.
    pub degenerate: bool,
    /// Mean gray level of the class at or below the threshold.
    pub background_mean: f64,
    /// Mean gray level of the class above the threshold (NaN if empty).
    pub foreground_mean: f64,
}

// Keeps (N1*S0 - N0*S1)^2 below 2^124.
const MAX_EXACT_TOTAL: u64 = 1 << 27;

/// Otsu threshold maximizing the between-class variance over `t in [0, 254]`.
///
/// Scores are compared exactly as rationals. When several thresholds share
/// the maximum, the first contiguous run of maximizers is taken and the floor
/// of its midpoint returned.
pub fn otsu_threshold(h: &GrayHistogram) -> Result<OtsuThreshold, VisionError> {
    let total = h.total();
    if total == 0 {
        return Err(VisionError::EmptyHistogram);
    }
    if total > MAX_EXACT_TOTAL {
        return Err(VisionError::HistogramTooLarge(total));
    }
    let occupied: Vec<usize> = (0..256).filter(|&k| h.counts[k] > 0).collect();
    if occupied.len() == 1 {
        let level = occupied[0];
        return Ok(OtsuThreshold {
            threshold: level as u8,
            degenerate: true,
            background_mean: level as f64,
            foreground_mean: f64::NAN,
        });
    }

    let sum_all: u128 = (0..256).map(|k| k as u128 * u128::from(h.counts[k])).sum();
    let n = u128::from(total);
    let mut n0: u128 = 0;
    let mut s0: u128 = 0;
    let mut scores = Vec::with_capacity(255);
    for t in 0..255usize {
        n0 += u128::from(h.counts[t]);
        s0 += t as u128 * u128::from(h.counts[t]);
        let n1 = n - n0;
        let s1 = sum_all - s0;
        let score = if n0 == 0 || n1 == 0 {
            Ratio::new_raw(0u128, 1u128)
        } else {
            // omega0 * omega1 * (mu0 - mu1)^2 up to the constant factor 1/N^2.
            let a = n1 * s0;
            let b = n0 * s1;
            let d = a.abs_diff(b);
            Ratio::new_raw(d * d, n0 * n1)
        };
        scores.push(score);
    }
    let best = scores.iter().max().expect("255 scores");
    let start = scores.iter().position(|s| s == best).expect("max exists");
    let len = scores[start..].iter().take_while(|s| *s == best).count();
    let t = (start + (start + len - 1)) / 2;

    let (mut c0, mut m0, mut c1, mut m1) = (0u64, 0.0, 0u64, 0.0);
    for (k, &c) in h.counts.iter().enumerate() {
        if k <= t {
            c0 += c;
            m0 += k as f64 * c as f64;
        } else {
            c1 += c;
            m1 += k as f64 * c as f64;
        }
    }
    Ok(OtsuThreshold {
        threshold: t as u8,
        degenerate: false,
        background_mean: if c0 > 0 { m0 / c0 as f64 } else { f64::NAN },
        foreground_mean: if c1 > 0 { m1 / c1 as f64 } else { f64::NAN },
    })
}
