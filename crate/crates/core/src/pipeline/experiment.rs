use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{jitter_detections, Localizer, PipelineError};
use crate::calibration::{calibrate_end_to_end, CalibrationOutcome, Method};
use crate::scenario::ScenarioError;
use crate::{CameraIntrinsics, Pose2D, Scenario, Scene};

/// How grid-point headings are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HeadingMode {
    /// Uniform in `(-pi, pi]`, drawn once per point from the master seed.
    Random,
    /// The same heading, radians, at every point.
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub nx: usize,
    pub ny: usize,
    /// First and last grid coordinate along `x`, cm.
    pub x_range: [f64; 2],
    pub y_range: [f64; 2],
    pub trials_per_point: usize,
    pub heading: HeadingMode,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            nx: 6,
            ny: 6,
            x_range: [26.0, 146.0],
            y_range: [26.0, 146.0],
            trials_per_point: 12,
            heading: HeadingMode::Random,
        }
    }
}

fn linspace(r: [f64; 2], n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![(r[0] + r[1]) / 2.0];
    }
    (0..n)
        .map(|k| r[0] + (r[1] - r[0]) * k as f64 / (n - 1) as f64)
        .collect()
}

impl GridConfig {
    /// Grid positions, row by row (`y` outer, `x` inner).
    pub fn positions(&self) -> Vec<(f64, f64)> {
        let xs = linspace(self.x_range, self.nx);
        let ys = linspace(self.y_range, self.ny);
        ys.iter()
            .flat_map(|&y| xs.iter().map(move |&x| (x, y)))
            .collect()
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |message: &str| ScenarioError::Invalid {
            field: "grid",
            message: message.into(),
        };
        if self.nx == 0 || self.ny == 0 {
            return Err(bad("nx and ny must be >= 1"));
        }
        if self.trials_per_point == 0 {
            return Err(bad("trials_per_point must be >= 1"));
        }
        if ![self.x_range, self.y_range].iter().flatten().all(|v| v.is_finite()) {
            return Err(bad("ranges must be finite"));
        }
        if let HeadingMode::Fixed(t) = self.heading {
            if !t.is_finite() {
                return Err(bad("fixed heading must be finite"));
            }
        }
        Ok(())
    }
}

/// Ground-truth poses and repetitions of a grid experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub points: Vec<Pose2D>,
    pub trials_per_point: usize,
}

impl GridSpec {
    pub fn from_config(cfg: &GridConfig, master_seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
        rng.set_stream(u64::MAX);
        let points = cfg
            .positions()
            .into_iter()
            .map(|(x, y)| {
                let theta = match cfg.heading {
                    HeadingMode::Random => {
                        std::f64::consts::PI * (1.0 - 2.0 * rng.random::<f64>())
                    }
                    HeadingMode::Fixed(t) => t,
                };
                Pose2D::new(x, y, theta)
            })
            .collect();
        Self {
            points,
            trials_per_point: cfg.trials_per_point,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len() * self.trials_per_point
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrialStatus {
    Ok,
    Failed(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub point_index: usize,
    pub trial_index: usize,
    pub seed: u64,
    pub ground_truth: Pose2D,
    pub estimate: Option<Pose2D>,
    /// Planar distance between estimate and truth, cm.
    pub error_cm: Option<f64>,
    pub status: TrialStatus,
}

/// Seed of one trial: the master seed's stream number `index`.
pub fn derive_trial_seed(master_seed: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng.next_u64()
}

#[derive(Debug, Clone)]
pub struct ExperimentRun {
    pub records: Vec<TrialRecord>,
    pub intrinsics: CameraIntrinsics,
    pub calibration: Option<CalibrationOutcome>,
}

/// Runs every grid point and trial.
///
/// Calibration, when requested, runs once first and its corrected intrinsics
/// are used for every trial. Trial seeds depend only on the master seed and
/// the trial's position in the grid, so runs with different calibration
/// methods see identical frames.
pub fn run_grid_experiment(
    spec: &GridSpec,
    scenario: &Scenario,
    method: Option<Method>,
    master_seed: u64,
) -> Result<ExperimentRun, PipelineError> {
    let scene = scenario.scene()?;
    let (intrinsics, calibration) = match method {
        None => (scenario.camera, None),
        Some(m) => {
            let out = calibrate_end_to_end(m, scenario, derive_trial_seed(master_seed, u64::MAX - 1))?;
            (out.intrinsics, Some(out))
        }
    };
    let localizer = scenario.localizer(intrinsics)?;
    let jobs: Vec<(usize, usize)> = (0..spec.points.len())
        .flat_map(|p| (0..spec.trials_per_point).map(move |t| (p, t)))
        .collect();
    let records = jobs
        .par_iter()
        .map(|&(p, t)| {
            let idx = (p * spec.trials_per_point + t) as u64;
            let seed = derive_trial_seed(master_seed, idx);
            run_trial(&scene, &localizer, scenario, spec.points[p], p, t, seed)
        })
        .collect();
    Ok(ExperimentRun {
        records,
        intrinsics,
        calibration,
    })
}

fn run_trial(
    scene: &Scene,
    localizer: &Localizer,
    scenario: &Scenario,
    truth: Pose2D,
    point_index: usize,
    trial_index: usize,
    seed: u64,
) -> TrialRecord {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let frame = scene.render_random_phase(&truth, &mut rng);
    let result = localizer.detect(&frame, None).and_then(|mut found| {
        jitter_detections(
            &mut found,
            scenario.noise.centroid_jitter_sigma,
            &localizer.intrinsics,
            &mut rng,
        );
        localizer.solve(&found, (point_index * 1000 + trial_index) as u64)
    });
    match result {
        Ok(fix) => TrialRecord {
            point_index,
            trial_index,
            seed,
            ground_truth: truth,
            estimate: Some(fix.pose),
            error_cm: Some(fix.pose.distance(&truth)),
            status: TrialStatus::Ok,
        },
        Err(e) => TrialRecord {
            point_index,
            trial_index,
            seed,
            ground_truth: truth,
            estimate: None,
            error_cm: None,
            status: TrialStatus::Failed(e.kind().to_string()),
        },
    }
}
