//! Lamp regions from a thresholded frame.
//!
//! A striped lamp binarizes into a stack of horizontal bars. A vertical
//! closing bridges the dark stripes so each lamp becomes one 8-connected
//! component. Each component is then described twice: by its
//! intensity-weighted centroid, and by a circle fitted to the sub-pixel edges
//! of its lit rows. The fitted circle recovers the full disc even when the
//! rows at its rim fall in a dark stripe.

use serde::{Deserialize, Serialize};

use crate::calibration::fit_circle_kasa;
use crate::{Circle, Frame, PixelPoint, Point2};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionConfig {
    /// Components with fewer pixels are discarded, px^2.
    pub min_area: usize,
    /// Smallest accepted window side, px.
    pub min_roi_size: u32,
    /// Height of the vertical closing element, rows. Should be at least the
    /// longest stripe period so no dark stripe splits a lamp.
    pub closing_rows: usize,
    /// Half-width of the row-wise box mean applied before choosing the
    /// threshold, px. 0 uses the raw frame.
    pub threshold_smoothing: u32,
}

impl Default for DetectionConfig {
    fn default() -> Self {
        Self {
            min_area: 200,
            min_roi_size: 8,
            closing_rows: 26,
            threshold_smoothing: 4,
        }
    }
}

/// A lamp region: window plus sub-pixel location estimates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoiWindow {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
    /// Centroid of the lit pixels weighted by brightness above the local
    /// background.
    pub centroid: PixelPoint,
    /// Circle fitted to the lit-row edges, when enough rows were lit.
    pub disc: Option<Circle>,
    /// Pixel count of the closed component.
    pub area: usize,
}

impl RoiWindow {
    /// Best available lamp centre: the fitted disc, else the centroid.
    pub fn center(&self) -> PixelPoint {
        match self.disc {
            Some(c) => PixelPoint::new(c.center.x, c.center.y),
            None => self.centroid,
        }
    }

    fn overlaps(&self, o: &RoiWindow) -> bool {
        self.x < o.x + o.w && o.x < self.x + self.w && self.y < o.y + o.h && o.y < self.y + self.h
    }
}

const BG: u8 = 0;
const LIT: u8 = 1;
const FILLED: u8 = 2;

#[derive(Debug, Clone, Copy)]
struct Run {
    row: u32,
    start: u32,
    end: u32, // inclusive
}

/// Extracts lamp regions, largest first. Overlapping windows keep the larger.
pub fn extract_rois(frame: &Frame, threshold: u8, cfg: &DetectionConfig) -> Vec<RoiWindow> {
    let (w, h) = (frame.width() as usize, frame.height() as usize);
    let mut mask: Vec<u8> = frame
        .pixels()
        .iter()
        .map(|&p| if p > threshold { LIT } else { BG })
        .collect();
    close_vertically(&mut mask, w, h, cfg.closing_rows);

    let runs = collect_runs(&mask, w, h);
    let labels = label_runs(&runs);

    let mut groups: Vec<Vec<Run>> = Vec::new();
    let mut slot = vec![usize::MAX; runs.len()];
    for (n, run) in runs.iter().enumerate() {
        let root = labels[n];
        if slot[root] == usize::MAX {
            slot[root] = groups.len();
            groups.push(Vec::new());
        }
        groups[slot[root]].push(*run);
    }

    let mut rois: Vec<RoiWindow> = groups
        .iter()
        .filter_map(|g| describe_component(frame, &mask, g, threshold, cfg))
        .collect();
    rois.sort_by(|a, b| {
        b.area
            .cmp(&a.area)
            .then(a.centroid.i.total_cmp(&b.centroid.i))
            .then(a.centroid.j.total_cmp(&b.centroid.j))
    });
    let mut kept: Vec<RoiWindow> = Vec::with_capacity(rois.len());
    for r in rois {
        if kept.iter().all(|k| !k.overlaps(&r)) {
            kept.push(r);
        }
    }
    kept
}

/// Re-measures a lamp inside a sub-window `(x, y, w, h)` of `frame`, using
/// only pixels of that window. Returns `None` when nothing in the window is
/// brighter than `threshold`.
pub fn measure_window(
    frame: &Frame,
    window: (u32, u32, u32, u32),
    threshold: u8,
    cfg: &DetectionConfig,
) -> Option<RoiWindow> {
    let (x0, y0, ww, wh) = window;
    let mut runs = Vec::new();
    let mut mask = vec![BG; frame.pixels().len()];
    let fw = frame.width() as usize;
    for row in y0..y0 + wh {
        for col in x0..x0 + ww {
            if frame.get(col as usize, row as usize) > threshold {
                mask[row as usize * fw + col as usize] = LIT;
            }
        }
    }
    // Vertical closing restricted to the window columns.
    for col in x0..x0 + ww {
        let mut last: Option<u32> = None;
        for row in y0..y0 + wh {
            let idx = row as usize * fw + col as usize;
            if mask[idx] == LIT {
                if let Some(l) = last {
                    let gap = (row - l - 1) as usize;
                    if gap > 0 && gap < cfg.closing_rows {
                        for r in l + 1..row {
                            mask[r as usize * fw + col as usize] = FILLED;
                        }
                    }
                }
                last = Some(row);
            }
        }
    }
    for row in y0..y0 + wh {
        let mut col = x0;
        while col < x0 + ww {
            if mask[row as usize * fw + col as usize] != BG {
                let start = col;
                while col < x0 + ww && mask[row as usize * fw + col as usize] != BG {
                    col += 1;
                }
                runs.push(Run { row, start, end: col - 1 });
            } else {
                col += 1;
            }
        }
    }
    if runs.is_empty() {
        return None;
    }
    // Keep the largest connected group inside the window.
    let labels = label_runs(&runs);
    let mut area = vec![0usize; runs.len()];
    for (n, r) in runs.iter().enumerate() {
        area[labels[n]] += (r.end - r.start + 1) as usize;
    }
    let best = (0..runs.len()).max_by_key(|&n| (area[n], std::cmp::Reverse(n)))?;
    let group: Vec<Run> = runs
        .iter()
        .enumerate()
        .filter(|(n, _)| labels[*n] == best)
        .map(|(_, r)| *r)
        .collect();
    let relaxed = DetectionConfig { min_area: 1, ..*cfg };
    describe_component_within(frame, &mask, &group, threshold, &relaxed, Some(window))
}

/// Fills vertical background gaps shorter than `len` rows between lit pixels.
fn close_vertically(mask: &mut [u8], w: usize, h: usize, len: usize) {
    if len < 2 {
        return;
    }
    let mut last: Vec<Option<usize>> = vec![None; w];
    for row in 0..h {
        let base = row * w;
        for col in 0..w {
            if mask[base + col] != LIT {
                continue;
            }
            if let Some(l) = last[col] {
                let gap = row - l - 1;
                if gap > 0 && gap < len {
                    for r in l + 1..row {
                        mask[r * w + col] = FILLED;
                    }
                }
            }
            last[col] = Some(row);
        }
    }
}

fn collect_runs(mask: &[u8], w: usize, h: usize) -> Vec<Run> {
    let mut runs = Vec::new();
    for row in 0..h {
        let line = &mask[row * w..(row + 1) * w];
        let mut col = 0;
        while col < w {
            if line[col] != BG {
                let start = col;
                while col < w && line[col] != BG {
                    col += 1;
                }
                runs.push(Run {
                    row: row as u32,
                    start: start as u32,
                    end: (col - 1) as u32,
                });
            } else {
                col += 1;
            }
        }
    }
    runs
}

/// 8-connected labelling of row-ordered runs. Returns the root run index of
/// each run.
fn label_runs(runs: &[Run]) -> Vec<usize> {
    let mut parent: Vec<usize> = (0..runs.len()).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    let mut prev_start = 0; // first run of the previous row
    let mut cur_start = 0;
    for n in 0..runs.len() {
        if n > 0 && runs[n].row != runs[n - 1].row {
            prev_start = if runs[n].row == runs[n - 1].row + 1 { cur_start } else { n };
            cur_start = n;
        }
        let r = runs[n];
        for m in prev_start..cur_start {
            let q = runs[m];
            if q.row + 1 != r.row {
                continue;
            }
            if q.start <= r.end + 1 && q.end + 1 >= r.start {
                let a = find(&mut parent, n);
                let b = find(&mut parent, m);
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    (0..runs.len()).map(|n| find(&mut parent, n)).collect()
}

fn describe_component(
    frame: &Frame,
    mask: &[u8],
    runs: &[Run],
    threshold: u8,
    cfg: &DetectionConfig,
) -> Option<RoiWindow> {
    describe_component_within(frame, mask, runs, threshold, cfg, None)
}

fn describe_component_within(
    frame: &Frame,
    mask: &[u8],
    runs: &[Run],
    threshold: u8,
    cfg: &DetectionConfig,
    clip: Option<(u32, u32, u32, u32)>,
) -> Option<RoiWindow> {
    let area: usize = runs.iter().map(|r| (r.end - r.start + 1) as usize).sum();
    if area < cfg.min_area {
        return None;
    }
    let fw = frame.width() as usize;
    let (mut bx0, mut by0, mut bx1, mut by1) = (u32::MAX, u32::MAX, 0u32, 0u32);
    for r in runs {
        bx0 = bx0.min(r.start);
        bx1 = bx1.max(r.end);
        by0 = by0.min(r.row);
        by1 = by1.max(r.row);
    }
    let (lim_x0, lim_y0, lim_x1, lim_y1) = match clip {
        Some((x, y, w, h)) => (x, y, x + w - 1, y + h - 1),
        None => (0, 0, frame.width() - 1, frame.height() - 1),
    };
    let background = local_background(frame, (bx0, by0, bx1, by1), (lim_x0, lim_y0, lim_x1, lim_y1));
    let (mut sw, mut si, mut sj) = (0.0f64, 0.0f64, 0.0f64);
    for r in runs {
        let row = r.row as usize;
        for col in r.start..=r.end {
            let idx = row * fw + col as usize;
            if mask[idx] == LIT {
                let v = (f64::from(frame.pixels()[idx]) - background).max(0.0);
                sw += v;
                si += v * (f64::from(col) + 0.5);
                sj += v * (row as f64 + 0.5);
            }
        }
    }
    if sw <= 0.0 {
        return None;
    }
    let centroid = PixelPoint::new(si / sw, sj / sw);
    let disc = fit_disc(frame, mask, runs, threshold, background, (lim_x0, lim_x1))
        .filter(|c| plausible_disc(c, (bx0, by0, bx1, by1), cfg.closing_rows));

    let (x, y, w, h) = match disc {
        Some(c) => {
            let x0 = (c.center.x - c.radius).floor().max(f64::from(lim_x0)) as u32;
            let y0 = (c.center.y - c.radius).floor().max(f64::from(lim_y0)) as u32;
            let x1 = ((c.center.x + c.radius).ceil() as u32).min(lim_x1 + 1);
            let y1 = ((c.center.y + c.radius).ceil() as u32).min(lim_y1 + 1);
            (x0, y0, x1.saturating_sub(x0), y1.saturating_sub(y0))
        }
        None => (bx0, by0, bx1 - bx0 + 1, by1 - by0 + 1),
    };
    if w < cfg.min_roi_size || h < cfg.min_roi_size {
        return None;
    }
    Some(RoiWindow {
        x,
        y,
        w,
        h,
        centroid,
        disc,
        area,
    })
}

/// A fitted circle must match the component it came from: centred inside
/// it, as wide as it, and taller only by rim rows lost to a dark stripe.
fn plausible_disc(c: &Circle, bbox: (u32, u32, u32, u32), closing_rows: usize) -> bool {
    let (x0, y0, x1, y1) = bbox;
    let w = f64::from(x1 - x0 + 1);
    let h = f64::from(y1 - y0 + 1);
    let inside = c.center.x >= f64::from(x0) - 1.0
        && c.center.x <= f64::from(x1) + 2.0
        && c.center.y >= f64::from(y0) - 1.0
        && c.center.y <= f64::from(y1) + 2.0;
    let d = 2.0 * c.radius;
    inside && (d - w).abs() <= 0.2 * w + 2.0 && d - h <= 2.0 * closing_rows as f64 + 2.0
}

/// Mean of the pixels on a ring two pixels outside the component box.
fn local_background(frame: &Frame, bbox: (u32, u32, u32, u32), lim: (u32, u32, u32, u32)) -> f64 {
    let (x0, y0, x1, y1) = bbox;
    let rx0 = x0.saturating_sub(2).max(lim.0);
    let ry0 = y0.saturating_sub(2).max(lim.1);
    let rx1 = (x1 + 2).min(lim.2);
    let ry1 = (y1 + 2).min(lim.3);
    let mut sum = 0.0;
    let mut n = 0usize;
    for col in rx0..=rx1 {
        for row in [ry0, ry1] {
            if row + 2 <= y0 || row >= y1 + 2 {
                sum += f64::from(frame.get(col as usize, row as usize));
                n += 1;
            }
        }
    }
    for row in ry0..=ry1 {
        for col in [rx0, rx1] {
            if col + 2 <= x0 || col >= x1 + 2 {
                sum += f64::from(frame.get(col as usize, row as usize));
                n += 1;
            }
        }
    }
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Circle through the sub-pixel edge points of every lit row.
///
/// Per row, the lit run's coverage-weighted chord length and centre give two
/// edge points. Rows whose run touches the clip limits are skipped.
fn fit_disc(
    frame: &Frame,
    mask: &[u8],
    runs: &[Run],
    threshold: u8,
    background: f64,
    cols: (u32, u32),
) -> Option<Circle> {
    let fw = frame.width() as usize;
    let mut edges: Vec<Point2> = Vec::new();
    // longest lit stretch per row
    let mut best: Vec<(u32, u32, u32)> = Vec::new(); // (row, start, end)
    for r in runs {
        let row = r.row as usize;
        let mut col = r.start;
        while col <= r.end {
            if mask[row * fw + col as usize] == LIT && frame.get(col as usize, row) > threshold {
                let s = col;
                while col <= r.end && mask[row * fw + col as usize] == LIT {
                    col += 1;
                }
                let e = col - 1;
                match best.last_mut() {
                    Some(b) if b.0 == r.row => {
                        if e - s > b.2 - b.1 {
                            *b = (r.row, s, e);
                        }
                    }
                    _ => best.push((r.row, s, e)),
                }
            } else {
                col += 1;
            }
        }
    }
    for &(row, s, e) in &best {
        if s <= cols.0 || e >= cols.1 {
            continue;
        }
        let line = frame.row(row as usize);
        let interior: Vec<f64> = if e > s + 1 {
            (s + 1..e).map(|c| f64::from(line[c as usize])).collect()
        } else {
            (s..=e).map(|c| f64::from(line[c as usize])).collect()
        };
        let level = interior.iter().sum::<f64>() / interior.len() as f64 - background;
        if level <= 0.0 {
            continue;
        }
        let lo = s.saturating_sub(2).max(cols.0);
        let hi = (e + 2).min(cols.1);
        let (mut chord, mut moment) = (0.0, 0.0);
        for c in lo..=hi {
            let wgt = ((f64::from(line[c as usize]) - background) / level).clamp(0.0, 1.0);
            chord += wgt;
            moment += wgt * (f64::from(c) + 0.5);
        }
        if chord < 1.0 {
            continue;
        }
        let cx = moment / chord;
        let y = f64::from(row) + 0.5;
        edges.push(Point2::new(cx - chord / 2.0, y));
        edges.push(Point2::new(cx + chord / 2.0, y));
    }
    if edges.len() < 8 {
        return None;
    }
    let first = fit_circle_kasa(&edges).ok()?;
    let resid: Vec<f64> = edges
        .iter()
        .map(|p| (p.distance(&first.center) - first.radius).abs())
        .collect();
    let rms = (resid.iter().map(|r| r * r).sum::<f64>() / resid.len() as f64).sqrt();
    let cut = (3.0 * rms).max(1.0);
    let kept: Vec<Point2> = edges
        .iter()
        .zip(&resid)
        .filter(|(_, r)| **r <= cut)
        .map(|(p, _)| *p)
        .collect();
    if kept.len() == edges.len() || kept.len() < 8 {
        return Some(first);
    }
    fit_circle_kasa(&kept).ok().or(Some(first))
}
