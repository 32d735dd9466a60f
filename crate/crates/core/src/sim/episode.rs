use std::fmt;

use super::render::{add_sensor_noise, render_ideal_disparity, render_stereo_pair, NoiseModel};
use super::{Scene, Vec3};
use crate::avoid::{AvoidanceCommand, AvoidanceConfig, Avoider, Direction};
use crate::error::{Error, Result};
use crate::imgio::DisparityMap;
use crate::pipeline::{Pipeline, PipelineConfig};
use crate::rectify::StereoCalibration;

/// Commanded velocity for `cmd`, then one Euler step of length `dt`.
///
/// Forward flies at `cfg.forward_speed` along +x; sidesteps stop forward
/// motion and move at `cfg.lateral_speed` (Left +y, Right -y, Up +z,
/// Down -z); Hold stops.
pub fn step_vehicle(position: Vec3, cmd: &AvoidanceCommand, cfg: &AvoidanceConfig, dt: f64) -> Result<(Vec3, Vec3)> {
    if !(dt > 0.0) {
        return Err(Error::Parameter(format!("time step {dt} must be positive")));
    }
    let (f, l) = (cfg.forward_speed, cfg.lateral_speed);
    let velocity = match cmd.direction {
        Direction::Forward => Vec3::new(f, 0.0, 0.0),
        Direction::Left => Vec3::new(0.0, l, 0.0),
        Direction::Right => Vec3::new(0.0, -l, 0.0),
        Direction::Up => Vec3::new(0.0, 0.0, l),
        Direction::Down => Vec3::new(0.0, 0.0, -l),
        Direction::Hold => Vec3::ZERO,
    };
    Ok((position + velocity * dt, velocity))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RenderMode {
    /// Ray-cast disparity straight from the scene.
    Ideal,
    /// Rendered stereo pair through the matching pipeline.
    Full,
}

impl fmt::Display for RenderMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RenderMode::Ideal => "ideal",
            RenderMode::Full => "full",
        })
    }
}

impl std::str::FromStr for RenderMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ideal" => Ok(RenderMode::Ideal),
            "full" => Ok(RenderMode::Full),
            other => Err(Error::Parameter(format!("unknown render mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeConfig {
    pub width: usize,
    pub height: usize,
    pub dt: f64,
    pub max_t: f64,
    pub vehicle_radius: f64,
    /// Height above the start the vehicle climbs to before flying.
    pub takeoff_height: f64,
    pub climb_rate: f64,
    pub avoidance: bool,
    pub mode: RenderMode,
    pub noise: Option<NoiseModel>,
    pub texture_seed: u64,
    /// Gaussian pixel noise (gray levels) on rendered pairs; keeps flat
    /// sky from matching at every disparity.
    pub sensor_noise: f64,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        Self {
            width: 256,
            height: 160,
            dt: 0.1,
            max_t: 60.0,
            vehicle_radius: 0.3,
            takeoff_height: 1.0,
            climb_rate: 1.0,
            avoidance: true,
            mode: RenderMode::Ideal,
            noise: None,
            texture_seed: 7,
            sensor_noise: 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Takeoff,
    Cruise,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameRecord {
    pub t: f64,
    pub phase: Phase,
    pub command: Direction,
    pub velocity: Vec3,
    /// Position after the step.
    pub position: Vec3,
    pub obstacles: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeReport {
    pub mode: RenderMode,
    pub avoidance: bool,
    pub frames: Vec<FrameRecord>,
    pub min_clearance: f64,
    pub goal_reached: bool,
    pub collision: bool,
}

impl EpisodeReport {
    pub fn final_position(&self) -> Option<Vec3> {
        self.frames.last().map(|f| f.position)
    }

    pub fn duration(&self) -> f64 {
        self.frames.last().map_or(0.0, |f| f.t)
    }

    /// Largest lateral or vertical deviation from the line the vehicle
    /// started cruising on.
    pub fn max_deviation(&self) -> f64 {
        let Some(first) = self.frames.iter().find(|f| f.phase == Phase::Cruise) else {
            return 0.0;
        };
        let line = first.position;
        self.frames
            .iter()
            .filter(|f| f.phase == Phase::Cruise)
            .map(|f| (f.position.y - line.y).abs().max((f.position.z - line.z).abs()))
            .fold(0.0, f64::max)
    }
}

impl fmt::Display for EpisodeReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "episode mode={} avoidance={} frames={} duration={:.2}",
            self.mode,
            if self.avoidance { "on" } else { "off" },
            self.frames.len(),
            self.duration()
        )?;
        writeln!(
            f,
            "result goal_reached={} collision={} min_clearance={:.3}",
            self.goal_reached, self.collision, self.min_clearance
        )?;
        if let Some(p) = self.final_position() {
            writeln!(f, "final pos={p}")?;
        }
        for r in &self.frames {
            let phase = match r.phase {
                Phase::Takeoff => "takeoff",
                Phase::Cruise => "cruise",
            };
            writeln!(
                f,
                "t={:.2} cmd={} v={} pos={} phase={} obstacles={}",
                r.t, r.command, r.velocity, r.position, phase, r.obstacles
            )?;
        }
        Ok(())
    }
}

/// [`run_episode_with`] without a frame callback.
pub fn run_episode(
    scene: &Scene,
    calib: &StereoCalibration,
    pipeline: &PipelineConfig,
    avoid: &AvoidanceConfig,
    ep: &EpisodeConfig,
) -> Result<EpisodeReport> {
    run_episode_with(scene, calib, pipeline, avoid, ep, |_, _| {})
}

/// Fly one episode at a fixed time step.
///
/// The vehicle climbs `takeoff_height` at `climb_rate`, then every step
/// renders a disparity frame, runs the avoidance step and integrates the
/// command. The episode ends when the vehicle crosses the goal's x-plane,
/// comes closer than `vehicle_radius` to an obstacle, or `max_t` runs out.
/// `on_frame` sees each disparity map the avoidance step consumed.
pub fn run_episode_with(
    scene: &Scene,
    calib: &StereoCalibration,
    pipeline: &PipelineConfig,
    avoid: &AvoidanceConfig,
    ep: &EpisodeConfig,
    mut on_frame: impl FnMut(usize, &DisparityMap),
) -> Result<EpisodeReport> {
    scene.validate()?;
    if !(ep.max_t.is_finite() && ep.max_t > 0.0) {
        return Err(Error::Parameter(format!("max_t {} must be finite and positive", ep.max_t)));
    }
    if !(ep.climb_rate > 0.0) || !(ep.takeoff_height >= 0.0) || !(ep.vehicle_radius >= 0.0) {
        return Err(Error::Parameter("takeoff and vehicle settings must be non-negative".into()));
    }
    let matcher = match ep.mode {
        RenderMode::Full => {
            if pipeline.d_max != calib.d_max {
                return Err(Error::Parameter(format!(
                    "pipeline d_max {} differs from rig d_max {}",
                    pipeline.d_max, calib.d_max
                )));
            }
            Some(Pipeline::new(pipeline.clone())?)
        }
        RenderMode::Ideal => None,
    };
    let mut avoider = Avoider::new(*calib, ep.width, ep.height, avoid.clone())?;

    let mut position = scene.start;
    let cruise_z = scene.start.z + ep.takeoff_height;
    let mut report = EpisodeReport {
        mode: ep.mode,
        avoidance: ep.avoidance,
        frames: Vec::new(),
        min_clearance: scene.clearance(position),
        goal_reached: false,
        collision: false,
    };
    let mut step = 0usize;
    let mut frame = 0usize;
    loop {
        step += 1;
        let t = step as f64 * ep.dt;
        if t > ep.max_t + 1e-9 {
            break;
        }
        let (phase, command, obstacles) = if position.z < cruise_z - 1e-9 {
            let climb = AvoidanceCommand {
                direction: Direction::Up,
                lateral_speed: ep.climb_rate,
                reason: None,
            };
            (Phase::Takeoff, climb, 0)
        } else if ep.avoidance {
            let d = match &matcher {
                Some(p) => {
                    let (mut l, mut r) = render_stereo_pair(scene, position, calib, ep.width, ep.height, ep.texture_seed)?;
                    if ep.sensor_noise > 0.0 {
                        let seed = ep.texture_seed.wrapping_mul(1_000_003).wrapping_add(2 * frame as u64);
                        l = add_sensor_noise(&l, ep.sensor_noise, seed)?;
                        r = add_sensor_noise(&r, ep.sensor_noise, seed + 1)?;
                    }
                    p.compute(&l, &r)?
                }
                None => {
                    let noise = ep.noise.map(|n| NoiseModel {
                        seed: n.seed.wrapping_add(frame as u64),
                        ..n
                    });
                    render_ideal_disparity(scene, position, calib, ep.width, ep.height, noise.as_ref())?
                }
            };
            on_frame(frame, &d);
            frame += 1;
            let s = avoider.step(&d)?;
            (Phase::Cruise, s.command, s.obstacles.len())
        } else {
            (Phase::Cruise, AvoidanceCommand::forward(), 0)
        };
        let (next, velocity) = match phase {
            Phase::Takeoff => {
                let climb = (cruise_z - position.z).min(ep.climb_rate * ep.dt);
                (position + Vec3::new(0.0, 0.0, climb), Vec3::new(0.0, 0.0, climb / ep.dt))
            }
            Phase::Cruise => step_vehicle(position, &command, avoid, ep.dt)?,
        };
        position = next;
        let clearance = scene.clearance(position);
        report.min_clearance = report.min_clearance.min(clearance);
        report.frames.push(FrameRecord {
            t,
            phase,
            command: command.direction,
            velocity,
            position,
            obstacles,
        });
        if clearance < ep.vehicle_radius {
            report.collision = true;
            break;
        }
        if position.x >= scene.goal.x {
            report.goal_reached = true;
            break;
        }
    }
    Ok(report)
}
