use std::io::{self, Write};

use super::{PipelineError, TrialRecord, TrialStatus};

pub const HISTOGRAM_BIN_CM: f64 = 0.2;
/// Largest tolerated fraction of failed trials.
pub const MAX_FAILURE_RATE: f64 = 0.01;
pub const RESULTS_HEADER: &str =
    "point_index,trial_index,seed,gt_x,gt_y,gt_theta,est_x,est_y,est_theta,error_cm,status";

#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub bin_width: f64,
    pub counts: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorStats {
    pub count: usize,
    pub failures: usize,
    pub mean: f64,
    pub p90: f64,
    pub max: f64,
    /// `(error, fraction of errors <= error)` at each distinct error.
    pub cdf: Vec<(f64, f64)>,
    pub histogram: Histogram,
}

/// Statistics over the successful records. Failed records are counted only.
pub fn compute_stats(records: &[TrialRecord]) -> Result<ErrorStats, PipelineError> {
    let mut errors: Vec<f64> = records.iter().filter_map(|r| r.error_cm).collect();
    let failures = records.len() - errors.len();
    if errors.is_empty() {
        return Err(PipelineError::EmptyInput);
    }
    errors.sort_by(f64::total_cmp);
    let n = errors.len();
    let mean = errors.iter().sum::<f64>() / n as f64;
    let max = errors[n - 1];
    // smallest e with #(errors <= e) >= 0.9 n, i.e. the ceil(0.9 n)-th value
    let p90 = errors[(9 * n).div_ceil(10) - 1];

    let mut cdf: Vec<(f64, f64)> = Vec::new();
    for (k, &e) in errors.iter().enumerate() {
        let frac = (k + 1) as f64 / n as f64;
        match cdf.last_mut() {
            Some(last) if last.0 == e => last.1 = frac,
            _ => cdf.push((e, frac)),
        }
    }

    let bins = ((max / HISTOGRAM_BIN_CM).ceil() as usize).max(1);
    let mut counts = vec![0u64; bins];
    for &e in &errors {
        let b = ((e / HISTOGRAM_BIN_CM).floor() as usize).min(bins - 1);
        counts[b] += 1;
    }
    Ok(ErrorStats {
        count: n,
        failures,
        mean,
        p90,
        max,
        cdf,
        histogram: Histogram {
            bin_width: HISTOGRAM_BIN_CM,
            counts,
        },
    })
}

/// Fails when more than [`MAX_FAILURE_RATE`] of the trials failed.
pub fn check_failure_rate(records: &[TrialRecord]) -> Result<(), PipelineError> {
    let failed = records
        .iter()
        .filter(|r| matches!(r.status, TrialStatus::Failed(_)))
        .count();
    if failed as f64 > MAX_FAILURE_RATE * records.len() as f64 {
        return Err(PipelineError::TooManyFailures {
            failed,
            total: records.len(),
            limit_pct: MAX_FAILURE_RATE * 100.0,
        });
    }
    Ok(())
}

pub fn write_results_csv<W: Write>(mut out: W, records: &[TrialRecord]) -> io::Result<()> {
    writeln!(out, "{RESULTS_HEADER}")?;
    for r in records {
        let gt = r.ground_truth;
        write!(
            out,
            "{},{},{},{},{},{},",
            r.point_index, r.trial_index, r.seed, gt.x, gt.y, gt.theta
        )?;
        match (r.estimate, r.error_cm) {
            (Some(e), Some(err)) => write!(out, "{},{},{},{},", e.x, e.y, e.theta, err)?,
            _ => write!(out, ",,,failed,")?,
        }
        match &r.status {
            TrialStatus::Ok => writeln!(out, "ok")?,
            TrialStatus::Failed(kind) => writeln!(out, "{kind}")?,
        }
    }
    Ok(())
}

pub fn write_stats_csv<W: Write>(mut out: W, s: &ErrorStats) -> io::Result<()> {
    writeln!(out, "metric,value")?;
    writeln!(out, "count,{}", s.count)?;
    writeln!(out, "failures,{}", s.failures)?;
    writeln!(out, "mean,{}", s.mean)?;
    writeln!(out, "p90,{}", s.p90)?;
    writeln!(out, "max,{}", s.max)?;
    writeln!(out, "section,cdf")?;
    writeln!(out, "error_cm,fraction")?;
    for (e, f) in &s.cdf {
        writeln!(out, "{e},{f}")?;
    }
    writeln!(out, "section,hist")?;
    writeln!(out, "bin_start_cm,count")?;
    for (k, c) in s.histogram.counts.iter().enumerate() {
        writeln!(out, "{},{c}", k as f64 * s.histogram.bin_width)?;
    }
    Ok(())
}
