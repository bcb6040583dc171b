//! Episodic UABS world.
//!
//! GUEs move along piece-wise linear paths (or replay recorded traces), the
//! UABS flies at constant altitude under a 9-action control, and every active
//! GUE generates a packet with probability `p_msg` at each step. Packets live
//! for one step only.
//!
//! Time convention: an episode starts at `t = 0` and takes `horizon` decisions.
//! The reward of the decision at `t` is counted on the geometry and packets at
//! `t + 1`.

use alloc::vec::Vec;
use core::fmt;

use rand::Rng;

use crate::channel::{self, ChannelError, ChannelParams, RewardParams};
use crate::geom::Vec2;

/// Default UABS altitude when a scenario does not set one.
pub const DEFAULT_ALTITUDE_M: f64 = 100.0;

/// Altitude used by the 40 m toy world, low enough for the toy coverage radius.
pub const TOY_ALTITUDE_M: f64 = 10.0;

const ARC_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum EnvError {
    InvalidArea,
    PathTooShort,
    RepeatedWaypoint { index: usize },
    OutOfArea { what: &'static str, position: Vec2 },
    NonPositiveSpeed(f64),
    StartTimeOutOfRange { start: u32, horizon: u32 },
    InvalidPMsg(f64),
    NoGues,
    ZeroHorizon,
    EpisodeFinished { t: u32 },
    Channel(ChannelError),
}

impl fmt::Display for EnvError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EnvError::InvalidArea => f.write_str("area width, height and altitude must be positive"),
            EnvError::PathTooShort => f.write_str("a path needs at least two points"),
            EnvError::RepeatedWaypoint { index } => {
                write!(f, "waypoint {index} repeats the previous point")
            }
            EnvError::OutOfArea { what, position } => {
                write!(f, "{what} ({}, {}) lies outside the area", position.x, position.y)
            }
            EnvError::NonPositiveSpeed(v) => write!(f, "speed must be positive, got {v}"),
            EnvError::StartTimeOutOfRange { start, horizon } => {
                write!(f, "start time {start} not in [1, {horizon}]")
            }
            EnvError::InvalidPMsg(p) => write!(f, "p_msg must lie in [0, 1], got {p}"),
            EnvError::NoGues => f.write_str("no GUEs"),
            EnvError::ZeroHorizon => f.write_str("horizon must be at least 1"),
            EnvError::EpisodeFinished { t } => write!(f, "cannot step a terminal state (t = {t})"),
            EnvError::Channel(e) => e.fmt(f),
        }
    }
}

/// Rectangle `[0, width] x [0, height]` plus the constant UABS altitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AreaSpec {
    pub width: f64,
    pub height: f64,
    pub altitude: f64,
}

impl AreaSpec {
    pub fn new(width: f64, height: f64, altitude: f64) -> Result<Self, EnvError> {
        let a = AreaSpec { width, height, altitude };
        a.validate()?;
        Ok(a)
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        if self.width > 0.0 && self.height > 0.0 && self.altitude > 0.0 {
            Ok(())
        } else {
            Err(EnvError::InvalidArea)
        }
    }

    pub fn contains(&self, p: Vec2) -> bool {
        (0.0..=self.width).contains(&p.x) && (0.0..=self.height).contains(&p.y)
    }

    pub fn clamp(&self, p: Vec2) -> Vec2 {
        Vec2::new(p.x.clamp(0.0, self.width), p.y.clamp(0.0, self.height))
    }

    fn check(&self, what: &'static str, p: Vec2) -> Result<(), EnvError> {
        if self.contains(p) {
            Ok(())
        } else {
            Err(EnvError::OutOfArea { what, position: p })
        }
    }
}

/// Polyline through at least two distinct consecutive in-area points.
#[derive(Debug, Clone, PartialEq)]
pub struct WaypointPath {
    points: Vec<Vec2>,
}

impl WaypointPath {
    pub fn new(points: Vec<Vec2>, area: &AreaSpec) -> Result<Self, EnvError> {
        if points.len() < 2 {
            return Err(EnvError::PathTooShort);
        }
        for (i, w) in points.windows(2).enumerate() {
            if w[0] == w[1] {
                return Err(EnvError::RepeatedWaypoint { index: i + 1 });
            }
        }
        for &p in &points {
            area.check("waypoint", p)?;
        }
        Ok(WaypointPath { points })
    }

    pub fn points(&self) -> &[Vec2] {
        &self.points
    }

    pub fn length(&self) -> f64 {
        self.points.windows(2).map(|w| w[0].distance(w[1])).sum()
    }

    /// Point at arc length `s` from the start; clamps to the endpoint.
    pub fn point_at(&self, mut s: f64) -> Vec2 {
        for w in self.points.windows(2) {
            let seg = w[0].distance(w[1]);
            if s <= seg {
                return w[0] + (w[1] - w[0]) * (s / seg);
            }
            s -= seg;
        }
        self.points[self.points.len() - 1]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GueSpec {
    pub path: WaypointPath,
    /// Meters per step.
    pub speed: f64,
    /// First active step, at least 1.
    pub start_time: u32,
}

impl GueSpec {
    /// Position at step `t`, or `None` while the GUE is off the road.
    ///
    /// The GUE appears at the first waypoint at `start_time` and advances
    /// `speed` meters of arc length per step; the step that reaches the
    /// endpoint is its last active one. `horizon` cuts activity off.
    pub fn position(&self, t: u32, horizon: u32) -> Option<Vec2> {
        if t < self.start_time || t > horizon {
            return None;
        }
        let k = (t - self.start_time) as f64;
        let len = self.path.length();
        let walked = k * self.speed;
        if walked < len - ARC_EPS {
            Some(self.path.point_at(walked))
        } else if (k - 1.0) * self.speed < len - ARC_EPS {
            Some(self.path.points[self.path.points.len() - 1])
        } else {
            None
        }
    }
}

/// Recorded positions of one GUE on consecutive steps starting at `start_time`.
#[derive(Debug, Clone, PartialEq)]
pub struct GueTrack {
    pub start_time: u32,
    pub positions: Vec<Vec2>,
}

impl GueTrack {
    pub fn position(&self, t: u32, horizon: u32) -> Option<Vec2> {
        if t < self.start_time || t > horizon {
            return None;
        }
        self.positions.get((t - self.start_time) as usize).copied()
    }
}

/// How GUE positions are produced.
#[derive(Debug, Clone, PartialEq)]
pub enum GueMotion {
    Waypoints(Vec<GueSpec>),
    Trace(Vec<GueTrack>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrafficPattern {
    pub motion: GueMotion,
    /// Per-step packet generation probability of an active GUE.
    pub p_msg: f64,
}

impl TrafficPattern {
    pub fn gue_count(&self) -> usize {
        match &self.motion {
            GueMotion::Waypoints(g) => g.len(),
            GueMotion::Trace(g) => g.len(),
        }
    }

    pub fn gue_position(&self, g: usize, t: u32, horizon: u32) -> Option<Vec2> {
        match &self.motion {
            GueMotion::Waypoints(gues) => gues[g].position(t, horizon),
            GueMotion::Trace(tracks) => tracks[g].position(t, horizon),
        }
    }
}

/// One episodic configuration: start position, traffic and horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskConfig {
    pub uabs_start: Vec2,
    pub traffic: TrafficPattern,
    pub horizon: u32,
    pub area: AreaSpec,
    /// UABS meters per step.
    pub uabs_speed: f64,
}

impl TaskConfig {
    pub fn validate(&self) -> Result<(), EnvError> {
        self.area.validate()?;
        self.area.check("uabs start", self.uabs_start)?;
        if self.horizon == 0 {
            return Err(EnvError::ZeroHorizon);
        }
        if self.uabs_speed.is_nan() || self.uabs_speed <= 0.0 {
            return Err(EnvError::NonPositiveSpeed(self.uabs_speed));
        }
        let p = self.traffic.p_msg;
        if !(0.0..=1.0).contains(&p) {
            return Err(EnvError::InvalidPMsg(p));
        }
        if self.traffic.gue_count() == 0 {
            return Err(EnvError::NoGues);
        }
        if let GueMotion::Waypoints(gues) = &self.traffic.motion {
            for g in gues {
                if g.speed.is_nan() || g.speed <= 0.0 {
                    return Err(EnvError::NonPositiveSpeed(g.speed));
                }
                if g.start_time < 1 || g.start_time > self.horizon {
                    return Err(EnvError::StartTimeOutOfRange {
                        start: g.start_time,
                        horizon: self.horizon,
                    });
                }
                for &p in g.path.points() {
                    self.area.check("waypoint", p)?;
                }
            }
        }
        Ok(())
    }
}

/// UABS control: hover or one of eight compass headings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum Action {
    Hover = 0,
    West = 1,
    North = 2,
    East = 3,
    South = 4,
    NorthWest = 5,
    NorthEast = 6,
    SouthEast = 7,
    SouthWest = 8,
}

impl Action {
    pub const COUNT: usize = 9;

    pub const ALL: [Action; 9] = [
        Action::Hover,
        Action::West,
        Action::North,
        Action::East,
        Action::South,
        Action::NorthWest,
        Action::NorthEast,
        Action::SouthEast,
        Action::SouthWest,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Action> {
        Action::ALL.get(i).copied()
    }

    /// Unit heading; zero for hover.
    pub fn direction(self) -> Vec2 {
        const D: f64 = core::f64::consts::FRAC_1_SQRT_2;
        match self {
            Action::Hover => Vec2::ZERO,
            Action::West => Vec2::new(-1.0, 0.0),
            Action::North => Vec2::new(0.0, 1.0),
            Action::East => Vec2::new(1.0, 0.0),
            Action::South => Vec2::new(0.0, -1.0),
            Action::NorthWest => Vec2::new(-D, D),
            Action::NorthEast => Vec2::new(D, D),
            Action::SouthEast => Vec2::new(D, -D),
            Action::SouthWest => Vec2::new(-D, -D),
        }
    }
}

/// Moves `v_u` meters along the action's heading, clipped to the area.
pub fn uabs_move(p: Vec2, a: Action, v_u: f64, area: &AreaSpec) -> Vec2 {
    if a == Action::Hover {
        return p;
    }
    area.clamp(p + a.direction() * v_u)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GueState {
    /// `None` while inactive.
    pub position: Option<Vec2>,
    pub has_packet: bool,
}

impl GueState {
    pub fn active(&self) -> bool {
        self.position.is_some()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorldState {
    pub t: u32,
    pub uabs_pos: Vec2,
    pub gues: Vec<GueState>,
}

impl WorldState {
    pub fn is_terminal(&self, task: &TaskConfig) -> bool {
        self.t >= task.horizon
    }
}

fn gue_states<R: Rng + ?Sized>(task: &TaskConfig, t: u32, rng: &mut R) -> Vec<GueState> {
    let p_msg = task.traffic.p_msg;
    (0..task.traffic.gue_count())
        .map(|g| {
            let position = task.traffic.gue_position(g, t, task.horizon);
            let has_packet = position.is_some() && rng.gen_bool(p_msg);
            GueState { position, has_packet }
        })
        .collect()
}

pub fn reset<R: Rng + ?Sized>(task: &TaskConfig, rng: &mut R) -> WorldState {
    WorldState {
        t: 0,
        uabs_pos: task.uabs_start,
        gues: gue_states(task, 0, rng),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub next: WorldState,
    pub reward: u32,
    pub served: Vec<usize>,
}

/// Advances one step. Randomness is consumed in a fixed order: packet draws
/// (GUE index order), link draws for GUEs holding a packet, overflow subset.
pub fn step<R: Rng + ?Sized>(
    state: &WorldState,
    a: Action,
    task: &TaskConfig,
    chan: &ChannelParams,
    rew: &RewardParams,
    rng: &mut R,
) -> Result<Transition, EnvError> {
    if state.is_terminal(task) {
        return Err(EnvError::EpisodeFinished { t: state.t });
    }
    let t = state.t + 1;
    let uabs_pos = uabs_move(state.uabs_pos, a, task.uabs_speed, &task.area);
    let gues = gue_states(task, t, rng);

    let eligible: Vec<usize> = gues
        .iter()
        .enumerate()
        .filter_map(|(g, s)| {
            let pos = s.position.filter(|_| s.has_packet)?;
            let snr = channel::link_snr_db(rng, uabs_pos, task.area.altitude, pos, chan);
            channel::covered(snr, chan.snr_th_db).then_some(g)
        })
        .collect();
    let collected = channel::collect_reward(&eligible, rew, rng);

    Ok(Transition {
        next: WorldState { t, uabs_pos, gues },
        reward: collected.reward,
        served: collected.served,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EncoderConfig {
    /// Number of nearest active GUEs encoded.
    pub k_nn: usize,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig { k_nn: 8 }
    }
}

impl EncoderConfig {
    pub fn feature_len(&self) -> usize {
        2 + 3 * self.k_nn
    }
}

/// Fixed-length features: normalized UABS position followed by
/// `(1, dx/W, dy/H)` for the `k_nn` nearest active GUEs, zero-padded.
pub fn encode_state(state: &WorldState, task: &TaskConfig, enc: &EncoderConfig) -> Vec<f64> {
    let (w, h) = (task.area.width, task.area.height);
    let u = state.uabs_pos;
    let mut near: Vec<(f64, usize, Vec2)> = state
        .gues
        .iter()
        .enumerate()
        .filter_map(|(g, s)| s.position.map(|p| (u.distance_sq(p), g, p)))
        .collect();
    near.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let mut out = Vec::with_capacity(enc.feature_len());
    out.push(u.x / w);
    out.push(u.y / h);
    for slot in 0..enc.k_nn {
        match near.get(slot) {
            Some(&(_, _, p)) => out.extend_from_slice(&[1.0, (p.x - u.x) / w, (p.y - u.y) / h]),
            None => out.extend_from_slice(&[0.0, 0.0, 0.0]),
        }
    }
    out
}

/// A task's simulator together with its channel and reward models.
///
/// Counts every `reset` and `step`, so callers can audit which tasks were
/// simulated when.
#[derive(Debug, Clone)]
pub struct Simulator {
    task: TaskConfig,
    chan: ChannelParams,
    rew: RewardParams,
    calls: u64,
}

impl Simulator {
    pub fn new(task: TaskConfig, chan: ChannelParams, rew: RewardParams) -> Result<Self, EnvError> {
        task.validate()?;
        chan.validate().map_err(EnvError::Channel)?;
        Ok(Simulator { task, chan, rew, calls: 0 })
    }

    pub fn task(&self) -> &TaskConfig {
        &self.task
    }

    pub fn channel(&self) -> &ChannelParams {
        &self.chan
    }

    pub fn reward_params(&self) -> &RewardParams {
        &self.rew
    }

    /// Number of `reset` + `step` calls so far.
    pub fn calls(&self) -> u64 {
        self.calls
    }

    pub fn reset<R: Rng + ?Sized>(&mut self, rng: &mut R) -> WorldState {
        self.calls += 1;
        reset(&self.task, rng)
    }

    pub fn step<R: Rng + ?Sized>(
        &mut self,
        state: &WorldState,
        a: Action,
        rng: &mut R,
    ) -> Result<Transition, EnvError> {
        self.calls += 1;
        step(state, a, &self.task, &self.chan, &self.rew, rng)
    }
}

/// The two alternating toy tasks: three GUEs circling the perimeter of a
/// 40 m square from its bottom-right corner, clockwise and counterclockwise.
pub fn make_toy_tasks() -> (TaskConfig, TaskConfig) {
    let area = AreaSpec { width: 40.0, height: 40.0, altitude: TOY_ALTITUDE_M };
    let (br, bl, tl, tr) = (
        Vec2::new(40.0, 0.0),
        Vec2::new(0.0, 0.0),
        Vec2::new(0.0, 40.0),
        Vec2::new(40.0, 40.0),
    );
    let make = |loop_points: [Vec2; 5]| {
        let path = WaypointPath::new(loop_points.to_vec(), &area).expect("static toy path");
        let gues = (1..=3)
            .map(|start_time| GueSpec { path: path.clone(), speed: 1.0, start_time })
            .collect();
        TaskConfig {
            uabs_start: Vec2::new(20.0, 0.0),
            traffic: TrafficPattern { motion: GueMotion::Waypoints(gues), p_msg: 1.0 },
            horizon: 60,
            area,
            uabs_speed: 1.0,
        }
    };
    (make([br, bl, tl, tr, br]), make([br, tr, tl, bl, br]))
}

/// Parameters for [`gen_random_task`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomTaskSpec {
    pub area: AreaSpec,
    /// Inclusive GUE count range.
    pub g_min: usize,
    pub g_max: usize,
    /// Nominal GUE speed, meters per step.
    pub gue_speed: f64,
    /// Each GUE speed is uniform in `gue_speed * [1 - jitter, 1 + jitter]`.
    pub speed_jitter: f64,
    pub horizon: u32,
    pub uabs_speed: f64,
    pub p_msg: f64,
}

impl RandomTaskSpec {
    /// Synthetic stand-in for the 1500 m x 900 m urban traces.
    pub fn urban() -> Self {
        RandomTaskSpec {
            area: AreaSpec { width: 1500.0, height: 900.0, altitude: DEFAULT_ALTITUDE_M },
            g_min: 15,
            g_max: 30,
            gue_speed: 10.0,
            speed_jitter: 0.5,
            horizon: 300,
            uabs_speed: 20.0,
            p_msg: 1.0,
        }
    }
}

/// Draws a random task: G uniform in the range, 3 to 8 uniform in-area
/// waypoints per GUE, start times uniform in `[1, max(1, T/2)]`.
pub fn gen_random_task<R: Rng + ?Sized>(spec: &RandomTaskSpec, rng: &mut R) -> TaskConfig {
    let area = spec.area;
    let point = |rng: &mut R| Vec2::new(rng.gen_range(0.0..=area.width), rng.gen_range(0.0..=area.height));
    let g = rng.gen_range(spec.g_min..=spec.g_max.max(spec.g_min));
    let latest_start = (spec.horizon / 2).max(1);
    let gues = (0..g)
        .map(|_| {
            let n = rng.gen_range(3..=8usize);
            let mut pts: Vec<Vec2> = Vec::with_capacity(n);
            while pts.len() < n {
                let p = point(rng);
                if pts.last() != Some(&p) {
                    pts.push(p);
                }
            }
            let j = spec.speed_jitter;
            let speed = if j > 0.0 {
                spec.gue_speed * rng.gen_range((1.0 - j)..=(1.0 + j))
            } else {
                spec.gue_speed
            };
            GueSpec {
                path: WaypointPath { points: pts },
                speed,
                start_time: rng.gen_range(1..=latest_start),
            }
        })
        .collect();
    TaskConfig {
        uabs_start: point(rng),
        traffic: TrafficPattern { motion: GueMotion::Waypoints(gues), p_msg: spec.p_msg },
        horizon: spec.horizon,
        area,
        uabs_speed: spec.uabs_speed,
    }
}
