//! `vlp` command-line front end.
//!
//! Machine-readable results go to stdout as one `key=value` line per
//! result; progress and diagnostics go to stderr.

pub mod config;

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use vlp_core::calibration::{calibrate_end_to_end, write_sample_log, CalibrationError, Method};
use vlp_core::pipeline::{
    check_failure_rate, compute_stats, run_grid_experiment, write_results_csv, write_stats_csv,
    GridSpec, PipelineError,
};
use vlp_core::scene_sim::PgmError;
use vlp_core::{CameraIntrinsics, Frame, Pose2D, ScenarioError};

pub use config::{parse_config, ConfigError, Loaded};

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const USAGE: i32 = 2;
    pub const CONFIG: i32 = 3;
    pub const IO: i32 = 4;
    pub const MALFORMED_INPUT: i32 = 5;
    pub const INSUFFICIENT_BEACONS: i32 = 6;
    pub const PIPELINE: i32 = 7;
    pub const EXPERIMENT_FAILED: i32 = 8;
    pub const CALIBRATION: i32 = 9;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{}: {source}", path.display())]
    MalformedFrame { path: PathBuf, source: PgmError },
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Calibration(#[from] CalibrationError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(ConfigError::Io { .. }) => exit::IO,
            CliError::Config(_) => exit::CONFIG,
            CliError::Io { .. } => exit::IO,
            CliError::MalformedFrame { source: PgmError::Io(_), .. } => exit::IO,
            CliError::MalformedFrame { .. } => exit::MALFORMED_INPUT,
            CliError::Usage(_) => exit::USAGE,
            CliError::Pipeline(PipelineError::InsufficientBeacons { .. }) => exit::INSUFFICIENT_BEACONS,
            CliError::Pipeline(PipelineError::TooManyFailures { .. }) => exit::EXPERIMENT_FAILED,
            CliError::Pipeline(PipelineError::Calibration(_)) => exit::CALIBRATION,
            CliError::Pipeline(PipelineError::Scenario(_)) => exit::CONFIG,
            CliError::Pipeline(_) => exit::PIPELINE,
            CliError::Calibration(_) => exit::CALIBRATION,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Parser)]
#[command(name = "vlp", version, about = "Rolling-shutter visible light positioning simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Run configuration (TOML).
    #[arg(long, env = "VLP_CONFIG")]
    pub config: PathBuf,
    /// Overrides the master seed from the config.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Rotation,
    Dispersion,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Rotation => Method::Rotation,
            MethodArg::Dispersion => Method::Dispersion,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CalibrationArg {
    None,
    Rotation,
    Dispersion,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render one frame to a binary PGM.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Camera pose `x,y,theta` (cm, cm, rad).
        #[arg(long, value_parser = parse_pose, allow_hyphen_values = true)]
        pose: Pose2D,
        /// Time of row 0, s. Defaults to the config's `frame_start_s`.
        #[arg(long)]
        frame_start: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimate the camera pose from a PGM frame.
    Locate {
        #[command(flatten)]
        common: Common,
        /// Intrinsics file written by `calibrate`; the config camera otherwise.
        #[arg(long)]
        intrinsics: Option<PathBuf>,
        frame: PathBuf,
    },
    /// Run a principal-point calibration in simulation.
    Calibrate {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        method: MethodArg,
        /// Output directory for `intrinsics.toml` and `samples.csv`.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the grid experiment and write `results.csv` and `stats.csv`.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "none")]
        calibration: CalibrationArg,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_pose(s: &str) -> Result<Pose2D, String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("`{p}`: {e}")))
        .collect::<Result<_, _>>()?;
    match parts[..] {
        [x, y, t] if parts.iter().all(|v| v.is_finite()) => Ok(Pose2D::new(x, y, t)),
        _ => Err("expected three finite numbers `x,y,theta`".into()),
    }
}

fn load(common: &Common) -> Result<(Loaded, u64), CliError> {
    let loaded = parse_config(&common.config)?;
    let seed = common.seed.unwrap_or(loaded.config.seed);
    Ok((loaded, seed))
}

/// Runs one subcommand, writing result lines to `out`.
pub fn run<W: Write>(cli: Cli, out: &mut W) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate {
            common,
            pose,
            frame_start,
            out: path,
        } => {
            let (loaded, seed) = load(&common)?;
            let sc = &loaded.scenario;
            sc.check_pose(&pose)
                .map_err(|e| CliError::Config(validation(&loaded.path, e)))?;
            let start = frame_start.unwrap_or(sc.rolling_shutter.frame_start_s);
            if !(start >= 0.0 && start.is_finite()) {
                return Err(CliError::Usage("--frame-start must be >= 0".into()));
            }
            let frame = sc.scene().map_err(PipelineError::from)?.render(&pose, start, seed);
            create_parent(&path)?;
            let file = File::create(&path).map_err(io_err(&path))?;
            let mut w = BufWriter::new(file);
            frame.write_pgm(&mut w).map_err(io_err(&path))?;
            w.flush().map_err(io_err(&path))?;
            writeln!(
                out,
                "frame path={} width={} height={} seed={seed} frame_start_s={start}",
                path.display(),
                frame.width(),
                frame.height()
            )
            .map_err(io_err(Path::new("<stdout>")))?;
        }
        Command::Locate {
            common,
            intrinsics,
            frame: path,
        } => {
            let (loaded, _) = load(&common)?;
            let k = match intrinsics {
                Some(p) => read_intrinsics(&p)?,
                None => loaded.scenario.camera,
            };
            let file = File::open(&path).map_err(io_err(&path))?;
            let frame = Frame::read_pgm(BufReader::new(file)).map_err(|source| CliError::MalformedFrame {
                path: path.clone(),
                source,
            })?;
            if frame.width() != k.width || frame.height() != k.height {
                return Err(CliError::MalformedFrame {
                    path,
                    source: PgmError::Malformed(format!(
                        "frame is {}x{}, camera is {}x{}",
                        frame.width(),
                        frame.height(),
                        k.width,
                        k.height
                    )),
                });
            }
            let localizer = loaded.scenario.localizer(k).map_err(PipelineError::from)?;
            let fix = localizer.locate(&frame, None)?;
            let p = fix.pose;
            if let Some(gt) = frame.meta.ground_truth {
                eprintln!("ground truth ({:.3}, {:.3}, {:.4}); error {:.4} cm", gt.x, gt.y, gt.theta, p.distance(&gt));
            }
            writeln!(
                out,
                "fix x={} y={} theta={} led_a={} led_b={} identified={}",
                p.x, p.y, p.theta, fix.led_pair.0, fix.led_pair.1, fix.identified
            )
            .map_err(io_err(Path::new("<stdout>")))?;
        }
        Command::Calibrate {
            common,
            method,
            out: dir,
        } => {
            let (loaded, seed) = load(&common)?;
            let sc = &loaded.scenario;
            let outcome = calibrate_end_to_end(method.into(), sc, seed)?;
            fs::create_dir_all(&dir).map_err(io_err(&dir))?;
            let k_path = dir.join("intrinsics.toml");
            fs::write(&k_path, intrinsics_toml(&outcome.intrinsics)).map_err(io_err(&k_path))?;
            let s_path = dir.join("samples.csv");
            let units = match outcome.method {
                Method::Rotation => "lamp image position, px",
                Method::Dispersion => "fix minus station, world frame, cm",
            };
            let file = File::create(&s_path).map_err(io_err(&s_path))?;
            write_sample_log(BufWriter::new(file), units, &outcome.samples).map_err(io_err(&s_path))?;
            let pp = outcome.intrinsics.principal_point;
            let truth = sc.true_intrinsics().principal_point;
            eprintln!(
                "{} calibration from {} samples ({} failed captures)",
                outcome.method,
                outcome.samples.len(),
                outcome.failed
            );
            if let Some(d) = &outcome.dispersion {
                eprintln!(
                    "dispersion mean ({:.4}, {:.4}) cm, min circle centre ({:.4}, {:.4}) radius {:.4} cm",
                    d.mean.x, d.mean.y, d.min_circle.center.x, d.min_circle.center.y, d.min_circle.radius
                );
            }
            writeln!(
                out,
                "calibration method={} i={} j={} residual_px={} samples={}",
                outcome.method,
                pp.i,
                pp.j,
                pp.distance(&truth),
                outcome.samples.len()
            )
            .map_err(io_err(Path::new("<stdout>")))?;
        }
        Command::Evaluate {
            common,
            calibration,
            out: dir,
        } => {
            let (loaded, seed) = load(&common)?;
            let sc = &loaded.scenario;
            let method = match calibration {
                CalibrationArg::None => None,
                CalibrationArg::Rotation => Some(Method::Rotation),
                CalibrationArg::Dispersion => Some(Method::Dispersion),
            };
            let spec = GridSpec::from_config(&sc.grid, seed);
            eprintln!("running {} trials", spec.len());
            let run = run_grid_experiment(&spec, sc, method, seed)?;
            fs::create_dir_all(&dir).map_err(io_err(&dir))?;
            let r_path = dir.join("results.csv");
            let mut w = BufWriter::new(File::create(&r_path).map_err(io_err(&r_path))?);
            write_results_csv(&mut w, &run.records).map_err(io_err(&r_path))?;
            w.flush().map_err(io_err(&r_path))?;
            let stats = compute_stats(&run.records)?;
            let s_path = dir.join("stats.csv");
            let mut w = BufWriter::new(File::create(&s_path).map_err(io_err(&s_path))?);
            write_stats_csv(&mut w, &stats).map_err(io_err(&s_path))?;
            w.flush().map_err(io_err(&s_path))?;
            writeln!(
                out,
                "stats calibration={} trials={} failures={} mean={} p90={} max={}",
                method.map_or("none".to_string(), |m| m.to_string()),
                run.records.len(),
                stats.failures,
                stats.mean,
                stats.p90,
                stats.max
            )
            .map_err(io_err(Path::new("<stdout>")))?;
            check_failure_rate(&run.records)?;
        }
    }
    Ok(())
}

fn validation(path: &Path, e: ScenarioError) -> ConfigError {
    ConfigError::Validation {
        path: path.to_path_buf(),
        line: None,
        message: e.to_string(),
    }
}

fn create_parent(path: &Path) -> Result<(), CliError> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => fs::create_dir_all(p).map_err(io_err(p)),
        _ => Ok(()),
    }
}

pub fn intrinsics_toml(k: &CameraIntrinsics) -> String {
    toml::to_string(k).expect("intrinsics are representable as TOML")
}

pub fn read_intrinsics(path: &Path) -> Result<CameraIntrinsics, CliError> {
    let src = fs::read_to_string(path).map_err(io_err(path))?;
    let k: CameraIntrinsics = toml::from_str(&src).map_err(|e| {
        CliError::Config(ConfigError::Parse {
            path: path.to_path_buf(),
            message: e.to_string().trim_end().to_string(),
        })
    })?;
    k.validate().map_err(|e| {
        CliError::Config(ConfigError::Validation {
            path: path.to_path_buf(),
            line: None,
            message: e.to_string(),
        })
    })?;
    Ok(k)
}
