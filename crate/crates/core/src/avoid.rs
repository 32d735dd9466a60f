//! Reactive avoidance: pick the critical obstacle, choose the cheapest of
//! four escape directions in image space, and smooth the decision with a
//! majority vote over recent frames.

use std::collections::VecDeque;
use std::fmt;

use crate::error::{Error, Result};
use crate::imgio::DisparityMap;
use crate::rectify::StereoCalibration;
use crate::uvmap::{detect_obstacles, DetectionConfig, Obstacle};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Forward,
    Left,
    Right,
    Up,
    Down,
    Hold,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Forward => "forward",
            Direction::Left => "left",
            Direction::Right => "right",
            Direction::Up => "up",
            Direction::Down => "down",
            Direction::Hold => "hold",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AvoidanceCommand {
    pub direction: Direction,
    /// Sidestep speed in m/s; zero for Forward and Hold.
    pub lateral_speed: f64,
    /// The obstacle that triggered an escape.
    pub reason: Option<Obstacle>,
}

impl AvoidanceCommand {
    pub fn forward() -> Self {
        Self {
            direction: Direction::Forward,
            lateral_speed: 0.0,
            reason: None,
        }
    }

    pub fn hold() -> Self {
        Self {
            direction: Direction::Hold,
            lateral_speed: 0.0,
            reason: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AvoidanceConfig {
    pub critical_distance_m: f64,
    pub safety_margin_px: f64,
    /// Frames in the majority vote; must be odd.
    pub vote_window: usize,
    pub forward_speed: f64,
    pub lateral_speed: f64,
    /// Corridor size as a fraction of frame width and height.
    pub corridor_fraction: f64,
    pub detection: DetectionConfig,
}

impl Default for AvoidanceConfig {
    fn default() -> Self {
        Self {
            critical_distance_m: 5.0,
            safety_margin_px: 10.0,
            vote_window: 5,
            forward_speed: 2.0,
            lateral_speed: 1.0,
            corridor_fraction: 0.4,
            detection: DetectionConfig::default(),
        }
    }
}

impl AvoidanceConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("critical_distance_m", self.critical_distance_m),
            ("forward_speed", self.forward_speed),
            ("lateral_speed", self.lateral_speed),
            ("corridor_fraction", self.corridor_fraction),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Parameter(format!("{name} = {v} must be positive")));
            }
        }
        if !(self.safety_margin_px >= 0.0) {
            return Err(Error::Parameter("safety_margin_px must be non-negative".into()));
        }
        if self.vote_window == 0 || self.vote_window.is_multiple_of(2) {
            return Err(Error::Parameter(format!("vote_window {} must be odd", self.vote_window)));
        }
        Ok(())
    }
}

/// The image-space box the vehicle flies through.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Corridor {
    pub u_min: f64,
    pub u_max: f64,
    pub v_min: f64,
    pub v_max: f64,
}

impl Corridor {
    /// A box of `fraction` × frame size centred on the principal point.
    pub fn centered(frame_w: usize, frame_h: usize, cx: f64, cy: f64, fraction: f64) -> Self {
        let hw = 0.5 * fraction * frame_w as f64;
        let hh = 0.5 * fraction * frame_h as f64;
        Self {
            u_min: cx - hw,
            u_max: cx + hw,
            v_min: cy - hh,
            v_max: cy + hh,
        }
    }

    pub fn overlaps(&self, ob: &Obstacle) -> bool {
        ob.u_min as f64 <= self.u_max
            && ob.u_max as f64 >= self.u_min
            && ob.v_min as f64 <= self.v_max
            && ob.v_max as f64 >= self.v_min
    }
}

/// The nearest obstacle within the critical distance that blocks the
/// corridor.
pub fn select_critical<'a>(obstacles: &'a [Obstacle], corridor: &Corridor, cfg: &AvoidanceConfig) -> Option<&'a Obstacle> {
    obstacles
        .iter()
        .filter(|o| o.depth_m <= cfg.critical_distance_m && corridor.overlaps(o))
        .min_by(|a, b| a.depth_m.total_cmp(&b.depth_m))
}

/// Pixel clearance for each escape direction, in tie-break order
/// Right, Left, Up, Down.
pub fn escape_costs(ob: &Obstacle, cx: f64, cy: f64, margin: f64) -> [(Direction, f64); 4] {
    [
        (Direction::Right, (ob.u_max as f64 - cx + margin).max(0.0)),
        (Direction::Left, (cx - ob.u_min as f64 + margin).max(0.0)),
        (Direction::Up, (cy - ob.v_min as f64 + margin).max(0.0)),
        (Direction::Down, (ob.v_max as f64 - cy + margin).max(0.0)),
    ]
}

/// Sidestep towards the obstacle edge that is closest to the heading.
pub fn plan_escape(ob: &Obstacle, cx: f64, cy: f64, margin: f64, lateral_speed: f64) -> AvoidanceCommand {
    let costs = escape_costs(ob, cx, cy, margin);
    let mut best = costs[0];
    for c in &costs[1..] {
        if c.1 < best.1 {
            best = *c;
        }
    }
    AvoidanceCommand {
        direction: best.0,
        lateral_speed,
        reason: Some(ob.clone()),
    }
}

/// Majority vote over the last `vote_window` raw commands.
#[derive(Debug, Clone, Default)]
pub struct TemporalFilter {
    window: usize,
    history: VecDeque<AvoidanceCommand>,
    last: Option<AvoidanceCommand>,
}

impl TemporalFilter {
    pub fn new(window: usize) -> Self {
        Self {
            window,
            history: VecDeque::with_capacity(window),
            last: None,
        }
    }

    pub fn history(&self) -> impl Iterator<Item = &AvoidanceCommand> {
        self.history.iter()
    }

    pub fn last_emitted(&self) -> Option<&AvoidanceCommand> {
        self.last.as_ref()
    }

    /// Record `current` and return the filtered command.
    ///
    /// Until the window is full, Forward passes through and anything else
    /// becomes Hold. Afterwards the strict-majority direction wins (its most
    /// recent instance is emitted); without a majority the previous emission
    /// repeats.
    pub fn update(&mut self, current: AvoidanceCommand) -> AvoidanceCommand {
        if self.history.len() == self.window {
            self.history.pop_front();
        }
        self.history.push_back(current.clone());
        let emitted = if self.history.len() < self.window {
            if current.direction == Direction::Forward {
                current
            } else {
                AvoidanceCommand::hold()
            }
        } else {
            match self.majority() {
                Some(cmd) => cmd,
                None => self.last.clone().unwrap_or_else(AvoidanceCommand::hold),
            }
        };
        self.last = Some(emitted.clone());
        emitted
    }

    fn majority(&self) -> Option<AvoidanceCommand> {
        let n = self.history.len();
        self.history.iter().rev().find_map(|cand| {
            let votes = self.history.iter().filter(|c| c.direction == cand.direction).count();
            (2 * votes > n).then(|| cand.clone())
        })
    }
}

/// Stateless form of [`TemporalFilter::update`] for an explicit window.
pub fn temporal_filter(
    history: &[AvoidanceCommand],
    previous: Option<&AvoidanceCommand>,
    current: AvoidanceCommand,
    vote_window: usize,
) -> AvoidanceCommand {
    let mut f = TemporalFilter::new(vote_window);
    let skip = history.len().saturating_sub(vote_window.saturating_sub(1));
    f.history.extend(history[skip..].iter().cloned());
    f.last = previous.cloned();
    f.update(current)
}

/// One vehicle's avoidance state: camera geometry plus the vote history.
#[derive(Debug, Clone)]
pub struct Avoider {
    calib: StereoCalibration,
    frame_w: usize,
    frame_h: usize,
    cfg: AvoidanceConfig,
    filter: TemporalFilter,
}

/// Outcome of one [`Avoider::step`].
#[derive(Debug, Clone)]
pub struct StepReport {
    pub obstacles: Vec<Obstacle>,
    pub raw: AvoidanceCommand,
    pub command: AvoidanceCommand,
}

impl Avoider {
    pub fn new(calib: StereoCalibration, frame_w: usize, frame_h: usize, cfg: AvoidanceConfig) -> Result<Self> {
        calib.validate()?;
        cfg.validate()?;
        Ok(Self {
            calib,
            frame_w,
            frame_h,
            filter: TemporalFilter::new(cfg.vote_window),
            cfg,
        })
    }

    pub fn config(&self) -> &AvoidanceConfig {
        &self.cfg
    }

    pub fn corridor(&self) -> Corridor {
        Corridor::centered(self.frame_w, self.frame_h, self.calib.cx, self.calib.cy, self.cfg.corridor_fraction)
    }

    /// Detect, decide and filter for one disparity frame.
    pub fn step(&mut self, d: &DisparityMap) -> Result<StepReport> {
        if d.width() != self.frame_w || d.height() != self.frame_h {
            return Err(Error::Dimension(format!(
                "frame {}x{}, avoider configured for {}x{}",
                d.width(),
                d.height(),
                self.frame_w,
                self.frame_h
            )));
        }
        let det = detect_obstacles(d, &self.calib, &self.cfg.detection)?;
        let raw = match select_critical(&det.obstacles, &self.corridor(), &self.cfg) {
            Some(ob) => plan_escape(ob, self.calib.cx, self.calib.cy, self.cfg.safety_margin_px, self.cfg.lateral_speed),
            None => AvoidanceCommand::forward(),
        };
        let command = self.filter.update(raw.clone());
        Ok(StepReport {
            obstacles: det.obstacles,
            raw,
            command,
        })
    }
}

/// Functional wrapper: run one avoidance step against `state`.
pub fn avoidance_step(d: &DisparityMap, state: &mut Avoider) -> Result<AvoidanceCommand> {
    state.step(d).map(|r| r.command)
}
