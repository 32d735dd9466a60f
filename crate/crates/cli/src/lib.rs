//! Command-line front end for the `stereo-avoid` library.

mod config;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::info;
use stereo_avoid::avoid::{plan_escape, select_critical, AvoidanceCommand, AvoidanceConfig, Corridor};
use stereo_avoid::bench::{format_csv, format_text, run_kitti, FrameSelection, KittiConfig};
use stereo_avoid::imgio::{load_gray, load_kitti_disparity, write_disparity, DisparityFormat};
use stereo_avoid::sim::{run_episode_with, sim_calibration, EpisodeConfig, NoiseModel, RenderMode, Scene};
use stereo_avoid::uvmap::{annotate, detect_obstacles, histogram_image, DetectionConfig};
use stereo_avoid::{CostKind, Pipeline, StereoCalibration};

pub use config::{parse_config, parse_config_for, parse_config_text, ConfigArgs};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Io(_) => 2,
        }
    }
}

impl From<stereo_avoid::Error> for CliError {
    fn from(e: stereo_avoid::Error) -> Self {
        use stereo_avoid::Error as E;
        match e {
            E::Io { .. } | E::Decode { .. } | E::Encode { .. } => CliError::Io(e.to_string()),
            other => CliError::Usage(other.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "stereo-avoid", version, about = "Stereo disparity, obstacle detection and avoidance")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute a disparity map from a stereo pair.
    Disparity(DisparityArgs),
    /// Detect obstacles in one frame and print the escape decision.
    Detect(DetectArgs),
    /// Fly a scene in the closed-loop simulator.
    Simulate(SimulateArgs),
    /// Score the pipeline on KITTI Stereo 2015 training data.
    EvalKitti(EvalArgs),
}

#[derive(Debug, Args)]
pub struct DisparityArgs {
    /// Left image (PNG or binary PGM).
    #[arg(long)]
    pub left: PathBuf,
    #[arg(long)]
    pub right: PathBuf,
    /// Output PNG.
    #[arg(long)]
    pub out: PathBuf,
    /// raw16 (KITTI encoding) or color.
    #[arg(long, default_value = "raw16")]
    pub format: String,
    #[command(flatten)]
    pub config: ConfigArgs,
}

#[derive(Debug, Args)]
pub struct CalibArgs {
    /// Focal length in pixels.
    #[arg(long, default_value_t = 200.0)]
    pub focal: f64,
    /// Baseline in metres.
    #[arg(long, default_value_t = 0.2)]
    pub baseline: f64,
    /// Principal point; defaults to the image centre.
    #[arg(long)]
    pub cx: Option<f64>,
    #[arg(long)]
    pub cy: Option<f64>,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    /// Precomputed disparity (16-bit KITTI encoding) instead of a pair.
    #[arg(long, conflicts_with_all = ["left", "right"])]
    pub disparity: Option<PathBuf>,
    #[arg(long, requires = "right")]
    pub left: Option<PathBuf>,
    #[arg(long, requires = "left")]
    pub right: Option<PathBuf>,
    /// Disparity with the U-map above and the V-map beside it, obstacles boxed.
    #[arg(long, visible_alias = "out")]
    pub annotate_out: Option<PathBuf>,
    /// U-disparity histogram (columns × disparity).
    #[arg(long)]
    pub umap_out: Option<PathBuf>,
    /// V-disparity histogram (disparity × rows).
    #[arg(long)]
    pub vmap_out: Option<PathBuf>,
    /// Obstacles closer than this are acted on (m).
    #[arg(long, default_value_t = 5.0)]
    pub critical_distance: f64,
    #[command(flatten)]
    pub calib: CalibArgs,
    #[command(flatten)]
    pub config: ConfigArgs,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Scene description file.
    #[arg(long)]
    pub scene: PathBuf,
    /// ideal (ray-cast disparity) or full (rendered pair through the pipeline).
    #[arg(long, default_value = "ideal")]
    pub mode: String,
    /// Episode time limit (s).
    #[arg(long, default_value_t = 60.0)]
    pub max_t: f64,
    /// Control period (s).
    #[arg(long, default_value_t = 0.1)]
    pub dt: f64,
    /// Fly straight regardless of obstacles.
    #[arg(long)]
    pub no_avoid: bool,
    /// Texture seed for rendered pairs and base seed for disparity noise.
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Gaussian disparity noise in pixels (ideal mode).
    #[arg(long)]
    pub noise_sigma: Option<f64>,
    /// Probability of dropping a disparity pixel (ideal mode).
    #[arg(long, default_value_t = 0.0)]
    pub dropout: f64,
    /// Pixel noise (gray levels) on rendered pairs (full mode).
    #[arg(long, default_value_t = 2.0)]
    pub sensor_noise: f64,
    /// Write every disparity frame as a colour PNG here.
    #[arg(long)]
    pub frames_dir: Option<PathBuf>,
    /// Also write the report to this file.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Print only the command stream, one `t= cmd= v=` line per frame.
    #[arg(long)]
    pub headless: bool,
    #[command(flatten)]
    pub config: ConfigArgs,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// KITTI 2015 training directory.
    #[arg(long)]
    pub dir: PathBuf,
    /// Number of frames, or `all`.
    #[arg(long, default_value = "all")]
    pub frames: String,
    /// Score both cost functions.
    #[arg(long)]
    pub both: bool,
    /// Crop origin.
    #[arg(long, default_value_t = 0)]
    pub roi_x: usize,
    #[arg(long, default_value_t = 0)]
    pub roi_y: usize,
    /// Text report path; a CSV is written next to it.
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[command(flatten)]
    pub config: ConfigArgs,
}

fn path_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

/// Run a parsed command, writing results to `out`.
pub fn run(cli: Cli, out: &mut dyn Write) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::Io(e.to_string());
    match cli.command {
        Command::Disparity(a) => {
            let cfg = parse_config(&a.config)?;
            info!("config: {cfg}");
            let format = match a.format.as_str() {
                "raw16" => DisparityFormat::Raw16,
                "color" | "colour" => DisparityFormat::Colorized { d_max: cfg.d_max },
                other => return Err(CliError::Usage(format!("format: unknown '{other}'"))),
            };
            let left = load_gray(&a.left)?;
            let right = load_gray(&a.right)?;
            let d = Pipeline::new(cfg)?.compute(&left, &right)?;
            write_disparity(&d, &a.out, format)?;
            writeln!(
                out,
                "wrote {} ({}x{}, {} valid)",
                a.out.display(),
                d.width(),
                d.height(),
                d.valid_count()
            )
            .map_err(io)?;
        }
        Command::Detect(a) => {
            let cfg = parse_config(&a.config)?;
            info!("config: {cfg}");
            let d = match (&a.disparity, &a.left, &a.right) {
                (Some(p), _, _) => load_kitti_disparity(p)?,
                (None, Some(l), Some(r)) => Pipeline::new(cfg.clone())?.compute(&load_gray(l)?, &load_gray(r)?)?,
                _ => return Err(CliError::Usage("detect needs --disparity or --left and --right".into())),
            };
            let calib = StereoCalibration::new(
                a.calib.baseline,
                a.calib.focal,
                a.calib.cx.unwrap_or((d.width() as f64 - 1.0) / 2.0),
                a.calib.cy.unwrap_or((d.height() as f64 - 1.0) / 2.0),
                cfg.d_max,
            )?;
            let avoid = AvoidanceConfig {
                critical_distance_m: a.critical_distance,
                ..AvoidanceConfig::default()
            };
            avoid.validate()?;
            let det = detect_obstacles(&d, &calib, &DetectionConfig::default())?;
            for ob in &det.obstacles {
                writeln!(out, "{ob}").map_err(io)?;
            }
            let corridor = Corridor::centered(d.width(), d.height(), calib.cx, calib.cy, avoid.corridor_fraction);
            let cmd = match select_critical(&det.obstacles, &corridor, &avoid) {
                Some(ob) => plan_escape(ob, calib.cx, calib.cy, avoid.safety_margin_px, avoid.lateral_speed),
                None => AvoidanceCommand::forward(),
            };
            writeln!(out, "cmd={}", cmd.direction).map_err(io)?;
            if let Some(p) = &a.annotate_out {
                annotate(&d, &det, cfg.d_max).save(p).map_err(|e| path_err(p, e))?;
            }
            if let Some(p) = &a.umap_out {
                histogram_image(&det.umap).save(p).map_err(|e| path_err(p, e))?;
            }
            if let Some(p) = &a.vmap_out {
                histogram_image(&det.vmap).save(p).map_err(|e| path_err(p, e))?;
            }
        }
        Command::Simulate(a) => {
            let cfg = parse_config(&a.config)?;
            info!("config: {cfg}");
            let mode: RenderMode = a.mode.parse()?;
            let scene = Scene::load(&a.scene)?;
            let calib = StereoCalibration {
                d_max: cfg.d_max,
                ..sim_calibration()
            };
            let noise = a.noise_sigma.map(|sigma| NoiseModel {
                sigma,
                dropout: a.dropout,
                seed: a.seed,
            });
            let ep = EpisodeConfig {
                dt: a.dt,
                max_t: a.max_t,
                avoidance: !a.no_avoid,
                mode,
                noise,
                texture_seed: a.seed,
                sensor_noise: a.sensor_noise,
                ..EpisodeConfig::default()
            };
            if let Some(dir) = &a.frames_dir {
                fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
            }
            let mut frame_err = None;
            let report = run_episode_with(&scene, &calib, &cfg, &AvoidanceConfig::default(), &ep, |i, d| {
                if let (Some(dir), None) = (&a.frames_dir, &frame_err) {
                    let path = dir.join(format!("frame_{i:05}.png"));
                    if let Err(e) = write_disparity(d, path, DisparityFormat::Colorized { d_max: calib.d_max }) {
                        frame_err = Some(e);
                    }
                }
            })?;
            if let Some(e) = frame_err {
                return Err(e.into());
            }
            let text = report.to_string();
            if a.headless {
                for f in &report.frames {
                    writeln!(out, "t={:.2} cmd={} v={}", f.t, f.command, f.velocity).map_err(io)?;
                }
            } else {
                write!(out, "{text}").map_err(io)?;
            }
            if let Some(p) = &a.report {
                write_file(p, &text)?;
            }
        }
        Command::EvalKitti(a) => {
            let frames = match a.frames.as_str() {
                "all" => FrameSelection::All,
                n => FrameSelection::First(
                    n.parse()
                        .map_err(|_| CliError::Usage(format!("frames: expected a count or 'all', got '{n}'")))?,
                ),
            };
            let configs = if a.both {
                vec![
                    parse_config_for(&a.config, CostKind::Census)?,
                    parse_config_for(&a.config, CostKind::Sad)?,
                ]
            } else {
                vec![parse_config(&a.config)?]
            };
            let mut reports = Vec::new();
            for pipeline in configs {
                info!("config: {pipeline}");
                let kc = KittiConfig {
                    pipeline,
                    frames: frames.clone(),
                    roi_origin: (a.roi_x, a.roi_y),
                };
                reports.push(run_kitti(&a.dir, &kc)?);
            }
            let text = format_text(&reports);
            write!(out, "{text}").map_err(io)?;
            if let Some(p) = &a.report {
                write_file(p, &text)?;
                write_file(&p.with_extension("csv"), &format_csv(&reports))?;
            }
        }
    }
    Ok(())
}
