//! A small deterministic flight simulator: analytic box and cylinder scenes,
//! a ray-cast pinhole stereo rig and first-order vehicle kinematics.
//!
//! World axes are x forward, y left, z up. The left camera sits at the
//! vehicle position looking along +x; the right camera is offset by the
//! baseline towards -y.

mod episode;
mod render;

use std::fmt;
use std::ops::{Add, Mul, Sub};
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

pub use episode::{
    run_episode, run_episode_with, step_vehicle, EpisodeConfig, EpisodeReport, FrameRecord, Phase, RenderMode,
};
pub use render::{add_sensor_noise, render_ideal_disparity, render_stereo_pair, sim_calibration, texture, NoiseModel};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 { x: 0.0, y: 0.0, z: 0.0 };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn norm(self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl fmt::Display for Vec3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:.3},{:.3},{:.3})", self.x, self.y, self.z)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    /// Axis-aligned box given by its centre and edge lengths.
    Box { center: Vec3, size: Vec3 },
    /// Vertical cylinder standing on `base_z`.
    Cylinder { x: f64, y: f64, radius: f64, base_z: f64, height: f64 },
}

impl Shape {
    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Shape::Box { center, size } => center.is_finite() && size.is_finite() && size.x > 0.0 && size.y > 0.0 && size.z > 0.0,
            Shape::Cylinder {
                x,
                y,
                radius,
                base_z,
                height,
            } => x.is_finite() && y.is_finite() && base_z.is_finite() && radius > 0.0 && height > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Parameter(format!("degenerate obstacle {self:?}")))
        }
    }

    /// Distance from `p` to the solid; zero inside.
    pub fn distance(&self, p: Vec3) -> f64 {
        match *self {
            Shape::Box { center, size } => {
                let dx = ((p.x - center.x).abs() - 0.5 * size.x).max(0.0);
                let dy = ((p.y - center.y).abs() - 0.5 * size.y).max(0.0);
                let dz = ((p.z - center.z).abs() - 0.5 * size.z).max(0.0);
                Vec3::new(dx, dy, dz).norm()
            }
            Shape::Cylinder {
                x,
                y,
                radius,
                base_z,
                height,
            } => {
                let radial = ((p.x - x).hypot(p.y - y) - radius).max(0.0);
                let vertical = (base_z - p.z).max(p.z - (base_z + height)).max(0.0);
                radial.hypot(vertical)
            }
        }
    }

    /// Smallest ray parameter `t > 0` where `origin + t * dir` enters the
    /// solid.
    pub fn intersect(&self, origin: Vec3, dir: Vec3) -> Option<f64> {
        match *self {
            Shape::Box { center, size } => {
                let mut t0 = f64::NEG_INFINITY;
                let mut t1 = f64::INFINITY;
                for (o, d, c, s) in [
                    (origin.x, dir.x, center.x, size.x),
                    (origin.y, dir.y, center.y, size.y),
                    (origin.z, dir.z, center.z, size.z),
                ] {
                    let (lo, hi) = (c - 0.5 * s, c + 0.5 * s);
                    if d == 0.0 {
                        if o < lo || o > hi {
                            return None;
                        }
                        continue;
                    }
                    let (a, b) = ((lo - o) / d, (hi - o) / d);
                    t0 = t0.max(a.min(b));
                    t1 = t1.min(a.max(b));
                }
                (t0 <= t1 && t0 > 0.0).then_some(t0)
            }
            Shape::Cylinder {
                x,
                y,
                radius,
                base_z,
                height,
            } => {
                let top = base_z + height;
                let inside_disc = |t: f64| {
                    let p = origin + dir * t;
                    (p.x - x).hypot(p.y - y) <= radius
                };
                let mut best: Option<f64> = None;
                let mut consider = |t: f64| {
                    if t > 0.0 && best.is_none_or(|b| t < b) {
                        best = Some(t);
                    }
                };
                // Lateral surface.
                let (ox, oy) = (origin.x - x, origin.y - y);
                let a = dir.x * dir.x + dir.y * dir.y;
                if a > 0.0 {
                    let b = 2.0 * (ox * dir.x + oy * dir.y);
                    let c = ox * ox + oy * oy - radius * radius;
                    let disc = b * b - 4.0 * a * c;
                    if disc >= 0.0 {
                        let t = (-b - disc.sqrt()) / (2.0 * a);
                        let z = origin.z + t * dir.z;
                        if (base_z..=top).contains(&z) {
                            consider(t);
                        }
                    }
                }
                // Caps.
                if dir.z != 0.0 {
                    for zc in [base_z, top] {
                        let t = (zc - origin.z) / dir.z;
                        if inside_disc(t) {
                            consider(t);
                        }
                    }
                }
                best
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub obstacles: Vec<Shape>,
    /// Height of the ground plane; `None` for free space.
    pub ground_z: Option<f64>,
    pub start: Vec3,
    pub goal: Vec3,
}

impl Scene {
    pub fn new(obstacles: Vec<Shape>, ground_z: Option<f64>, start: Vec3, goal: Vec3) -> Result<Self> {
        let s = Self {
            obstacles,
            ground_z,
            start,
            goal,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        for o in &self.obstacles {
            o.validate()?;
        }
        if !self.start.is_finite() || !self.goal.is_finite() {
            return Err(Error::Parameter("start and goal must be finite".into()));
        }
        if (self.goal - self.start).norm() == 0.0 {
            return Err(Error::Parameter("goal coincides with start".into()));
        }
        Ok(())
    }

    /// Nearest hit along a ray: (ray parameter, obstacle index or `None` for
    /// the ground).
    pub fn cast(&self, origin: Vec3, dir: Vec3) -> Option<(f64, Option<usize>)> {
        let mut best: Option<(f64, Option<usize>)> = None;
        for (i, o) in self.obstacles.iter().enumerate() {
            if let Some(t) = o.intersect(origin, dir) {
                if best.is_none_or(|(b, _)| t < b) {
                    best = Some((t, Some(i)));
                }
            }
        }
        if let Some(g) = self.ground_z {
            if dir.z < 0.0 && origin.z > g {
                let t = (g - origin.z) / dir.z;
                if best.is_none_or(|(b, _)| t < b) {
                    best = Some((t, None));
                }
            }
        }
        best
    }

    /// Distance from `p` to the nearest obstacle surface; infinite when
    /// the scene has no obstacles. The ground is not counted.
    pub fn clearance(&self, p: Vec3) -> f64 {
        self.obstacles.iter().map(|o| o.distance(p)).fold(f64::INFINITY, f64::min)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        text.parse()
    }
}

/// Line format, `#` starts a comment:
///
/// ```text
/// ground 0
/// start 0 0
/// goal 30 0 1
/// box 10 0 1 2 2 2
/// cylinder 20 -1 0.5 3
/// ```
///
/// Boxes are centre and size; cylinders are axis position, radius and
/// height and stand on the ground (or z = 0 without one). Without a `start`
/// line the vehicle starts at the origin on the ground.
impl FromStr for Scene {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut boxes = Vec::new();
        let mut cylinders = Vec::new();
        let mut ground = None;
        let mut start = None;
        let mut goal = None;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let parse_err = |reason: String| Error::Parse { line: i + 1, reason };
            let mut words = line.split_whitespace();
            let keyword = words.next().unwrap_or_default();
            let nums = words
                .map(|w| w.parse::<f64>().map_err(|_| parse_err(format!("bad number {w:?}"))))
                .collect::<Result<Vec<_>>>()?;
            let expect = |n: usize| {
                if nums.len() == n {
                    Ok(())
                } else {
                    Err(parse_err(format!("{keyword} takes {n} numbers, got {}", nums.len())))
                }
            };
            match keyword {
                "box" => {
                    expect(6)?;
                    boxes.push(Shape::Box {
                        center: Vec3::new(nums[0], nums[1], nums[2]),
                        size: Vec3::new(nums[3], nums[4], nums[5]),
                    });
                }
                "cylinder" => {
                    expect(4)?;
                    cylinders.push((nums[0], nums[1], nums[2], nums[3]));
                }
                "goal" => {
                    expect(3)?;
                    goal = Some(Vec3::new(nums[0], nums[1], nums[2]));
                }
                "start" => {
                    expect(2)?;
                    start = Some((nums[0], nums[1]));
                }
                "ground" => {
                    expect(1)?;
                    ground = Some(nums[0]);
                }
                other => return Err(parse_err(format!("unknown keyword {other:?}"))),
            }
        }
        let base_z = ground.unwrap_or(0.0);
        let mut obstacles = boxes;
        obstacles.extend(cylinders.into_iter().map(|(x, y, radius, height)| Shape::Cylinder {
            x,
            y,
            radius,
            base_z,
            height,
        }));
        let (sx, sy) = start.unwrap_or((0.0, 0.0));
        let goal = goal.ok_or_else(|| Error::Parse {
            line: text.lines().count(),
            reason: "missing goal".into(),
        })?;
        Scene::new(obstacles, ground, Vec3::new(sx, sy, base_z), goal)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_scene_file() {
        let s: Scene = "# test\nground 0\ngoal 30 0 1\nbox 10 0 1 2 2 2\ncylinder 20 -1 0.5 3 # pole\n"
            .parse()
            .unwrap();
        assert_eq!(s.obstacles.len(), 2);
        assert_eq!(s.ground_z, Some(0.0));
        assert_eq!(s.goal, Vec3::new(30.0, 0.0, 1.0));
        assert!(matches!(s.obstacles[1], Shape::Cylinder { height, .. } if height == 3.0));
    }

    #[test]
    fn parse_errors_carry_line() {
        let e = "goal 1 0 0\nbox 1 2 3\n".parse::<Scene>().unwrap_err();
        assert!(matches!(e, Error::Parse { line: 2, .. }));
        assert!("box 1 1 1 1 1 1\n".parse::<Scene>().is_err());
        assert!("goal 1 0 0\nwall 1\n".parse::<Scene>().is_err());
        assert!("goal 1 0 0\nbox 5 0 0 0 1 1\n".parse::<Scene>().is_err());
        assert!("goal 0 0 0\n".parse::<Scene>().is_err());
    }

    #[test]
    fn box_intersection_and_distance() {
        let b = Shape::Box {
            center: Vec3::new(10.0, 0.0, 1.0),
            size: Vec3::new(2.0, 2.0, 2.0),
        };
        let o = Vec3::new(0.0, 0.0, 1.0);
        assert_eq!(b.intersect(o, Vec3::new(1.0, 0.0, 0.0)), Some(9.0));
        assert_eq!(b.intersect(o, Vec3::new(1.0, 0.5, 0.0)), None);
        assert_eq!(b.intersect(o, Vec3::new(-1.0, 0.0, 0.0)), None);
        assert_eq!(b.distance(o), 9.0);
        assert_eq!(b.distance(Vec3::new(10.0, 0.0, 1.5)), 0.0);
        assert!((b.distance(Vec3::new(12.0, 2.0, 1.0)) - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn cylinder_intersection_and_distance() {
        let c = Shape::Cylinder {
            x: 10.0,
            y: 0.0,
            radius: 1.0,
            base_z: 0.0,
            height: 2.0,
        };
        let o = Vec3::new(0.0, 0.0, 1.0);
        assert!((c.intersect(o, Vec3::new(1.0, 0.0, 0.0)).unwrap() - 9.0).abs() < 1e-12);
        // Over the top.
        assert_eq!(c.intersect(Vec3::new(0.0, 0.0, 3.0), Vec3::new(1.0, 0.0, 0.0)), None);
        // Through the cap.
        let t = c.intersect(Vec3::new(10.0, 0.0, 5.0), Vec3::new(0.0, 0.0, -1.0)).unwrap();
        assert!((t - 3.0).abs() < 1e-12);
        assert!((c.distance(Vec3::new(10.0, 3.0, 1.0)) - 2.0).abs() < 1e-12);
        assert!((c.distance(Vec3::new(10.0, 0.0, 4.0)) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn cast_prefers_nearest() {
        let s: Scene = "ground 0\ngoal 30 0 1\nbox 10 0 1 2 2 2\nbox 6 0 1 1 1 1\n".parse().unwrap();
        let (t, hit) = s.cast(Vec3::new(0.0, 0.0, 1.0), Vec3::new(1.0, 0.0, 0.0)).unwrap();
        assert_eq!((t, hit), (5.5, Some(1)));
        let (t, hit) = s.cast(Vec3::new(0.0, 0.0, 1.0), Vec3::new(1.0, 0.0, -0.5)).unwrap();
        assert_eq!((t, hit), (2.0, None));
        assert!(s.cast(Vec3::new(0.0, 0.0, 1.0), Vec3::new(1.0, 0.0, 0.5)).is_none());
        assert_eq!(s.clearance(Vec3::new(0.0, 0.0, 1.0)), 5.5);
    }
}
