//! Kinematic world model.
//!
//! Vehicles move along fixed 1-D paths embedded in the plane. A path is a
//! polyline parametrized by arc length; a vehicle's longitudinal motion over
//! the prediction horizon is described by an [`AccelerationProfile`], i.e. a
//! few constant-acceleration phases followed by constant velocity. All
//! prediction is closed form (piecewise quadratic in time), and a vehicle that
//! brakes to a standstill stays there instead of reversing.

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point = Vector2<f64>;

/// Slack used when comparing times against the horizon.
const TIME_EPS: f64 = 1e-9;

/// Polyline path with arc-length parametrization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PathDef", into = "PathDef")]
pub struct PathGeometry {
    waypoints: Vec<Point>,
    /// `cumulative[i]` is the arc length at `waypoints[i]`.
    cumulative: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct PathDef {
    waypoints: Vec<[f64; 2]>,
}

impl TryFrom<PathDef> for PathGeometry {
    type Error = Error;

    fn try_from(def: PathDef) -> Result<Self> {
        PathGeometry::new(
            def.waypoints
                .iter()
                .map(|p| Point::new(p[0], p[1]))
                .collect(),
        )
    }
}

impl From<PathGeometry> for PathDef {
    fn from(path: PathGeometry) -> Self {
        PathDef {
            waypoints: path.waypoints.iter().map(|p| [p.x, p.y]).collect(),
        }
    }
}

impl PathGeometry {
    pub fn new(waypoints: Vec<Point>) -> Result<Self> {
        if waypoints.len() < 2 {
            return Err(Error::invalid("path", "needs at least two waypoints"));
        }
        if waypoints
            .iter()
            .any(|p| !p.x.is_finite() || !p.y.is_finite())
        {
            return Err(Error::invalid("path", "waypoints must be finite"));
        }
        let mut cumulative = Vec::with_capacity(waypoints.len());
        cumulative.push(0.0);
        for pair in waypoints.windows(2) {
            let seg = (pair[1] - pair[0]).norm();
            if seg <= 0.0 {
                return Err(Error::invalid("path", "consecutive waypoints coincide"));
            }
            let last = *cumulative.last().unwrap();
            cumulative.push(last + seg);
        }
        Ok(Self {
            waypoints,
            cumulative,
        })
    }

    /// Straight two-point path.
    pub fn straight(from: Point, to: Point) -> Result<Self> {
        Self::new(vec![from, to])
    }

    pub fn waypoints(&self) -> &[Point] {
        &self.waypoints
    }

    pub fn length(&self) -> f64 {
        *self.cumulative.last().unwrap()
    }

    /// Index of the segment containing arc length `s` (clamped to valid segments).
    fn segment_index(&self, s: f64) -> usize {
        let n_seg = self.waypoints.len() - 1;
        // first cumulative entry strictly greater than s, minus one
        let idx = self.cumulative.partition_point(|&c| c <= s);
        idx.saturating_sub(1).min(n_seg - 1)
    }

    fn segment_direction(&self, seg: usize) -> Point {
        (self.waypoints[seg + 1] - self.waypoints[seg]).normalize()
    }

    /// Point on the polyline at arc length `s`.
    pub fn position_at(&self, s: f64) -> Result<Point> {
        let len = self.length();
        if !(0.0..=len).contains(&s) {
            return Err(Error::out_of_range("path position", s, 0.0, len));
        }
        Ok(self.position_extrapolated(s))
    }

    /// Like [`position_at`](Self::position_at), but continues the first and
    /// last segments in a straight line outside `[0, length]`.
    pub fn position_extrapolated(&self, s: f64) -> Point {
        let seg = self.segment_index(s);
        let offset = s - self.cumulative[seg];
        self.waypoints[seg] + self.segment_direction(seg) * offset
    }

    /// Heading in radians of the segment at `s` (extrapolated outside the path).
    pub fn heading_at(&self, s: f64) -> f64 {
        let d = self.segment_direction(self.segment_index(s));
        d.y.atan2(d.x)
    }
}

/// Instantaneous longitudinal state of one vehicle on its path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    /// Meters along the vehicle's path.
    pub path_position: f64,
    pub velocity: f64,
    pub acceleration: f64,
    pub timestamp: f64,
    pub length: f64,
    pub width: f64,
}

impl VehicleState {
    pub fn new(path_position: f64, velocity: f64) -> Self {
        Self {
            path_position,
            velocity,
            acceleration: 0.0,
            timestamp: 0.0,
            length: 4.0,
            width: 1.8,
        }
    }

    pub fn with_footprint(mut self, length: f64, width: f64) -> Self {
        self.length = length;
        self.width = width;
        self
    }

    pub fn at_time(mut self, timestamp: f64) -> Self {
        self.timestamp = timestamp;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            self.path_position,
            self.velocity,
            self.acceleration,
            self.timestamp,
            self.length,
            self.width,
        ];
        if fields.iter().any(|f| !f.is_finite()) {
            return Err(Error::invalid("vehicle state", "non-finite field"));
        }
        if self.velocity < 0.0 {
            return Err(Error::invalid("vehicle state", "negative velocity"));
        }
        if self.length <= 0.0 || self.width <= 0.0 {
            return Err(Error::invalid(
                "vehicle state",
                "footprint must be positive",
            ));
        }
        Ok(())
    }
}

/// One constant-acceleration phase of a profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Phase {
    pub acceleration: f64,
    pub duration: f64,
}

/// Candidate future behavior: acceleration phases, then constant velocity
/// until `horizon`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccelerationProfile {
    phases: Vec<Phase>,
    horizon: f64,
}

impl AccelerationProfile {
    pub fn new(phases: Vec<Phase>, horizon: f64) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::invalid(
                "profile",
                format!("horizon {horizon} must be > 0"),
            ));
        }
        let mut total = 0.0;
        for p in &phases {
            if !p.acceleration.is_finite() {
                return Err(Error::invalid("profile", "non-finite acceleration"));
            }
            if !(p.duration.is_finite() && p.duration > 0.0) {
                return Err(Error::invalid(
                    "profile",
                    format!("phase duration {} must be > 0", p.duration),
                ));
            }
            total += p.duration;
        }
        if total > horizon + TIME_EPS {
            return Err(Error::invalid(
                "profile",
                format!("total phase duration {total} exceeds horizon {horizon}"),
            ));
        }
        Ok(Self { phases, horizon })
    }

    pub fn constant_velocity(horizon: f64) -> Result<Self> {
        Self::new(Vec::new(), horizon)
    }

    /// Single phase of `acceleration` lasting `duration`, then constant velocity.
    pub fn single(acceleration: f64, duration: f64, horizon: f64) -> Result<Self> {
        Self::new(
            vec![Phase {
                acceleration,
                duration,
            }],
            horizon,
        )
    }

    pub fn phases(&self) -> &[Phase] {
        &self.phases
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn phase_duration(&self) -> f64 {
        self.phases.iter().map(|p| p.duration).sum()
    }

    /// Acceleration of the first phase, 0 for a pure constant-velocity profile.
    pub fn first_acceleration(&self) -> f64 {
        self.phases.first().map_or(0.0, |p| p.acceleration)
    }

    /// Canonical form of this profile for a vehicle starting at `v0`:
    /// braking phases are cut where the vehicle comes to rest, phases that
    /// would brake a stopped vehicle are dropped, adjacent phases with equal
    /// acceleration are merged and trailing zero-acceleration phases are
    /// folded into the terminal constant-velocity segment.
    pub fn normalized(&self, v0: f64) -> Self {
        let mut out: Vec<Phase> = Vec::with_capacity(self.phases.len());
        let mut v = v0.max(0.0);
        for p in &self.phases {
            let mut phase = *p;
            if phase.acceleration < 0.0 {
                if v <= 0.0 {
                    continue;
                }
                let t_stop = v / -phase.acceleration;
                if t_stop < phase.duration {
                    phase.duration = t_stop;
                }
            }
            v = (v + phase.acceleration * phase.duration).max(0.0);
            match out.last_mut() {
                Some(last) if last.acceleration == phase.acceleration => {
                    last.duration += phase.duration
                }
                _ => out.push(phase),
            }
        }
        while out.last().is_some_and(|p| p.acceleration == 0.0) {
            out.pop();
        }
        Self {
            phases: out,
            horizon: self.horizon,
        }
    }

    /// The remainder of this profile after `elapsed` seconds, with the
    /// horizon shortened accordingly.
    pub fn shifted(&self, elapsed: f64) -> Result<Self> {
        if !(0.0..self.horizon).contains(&elapsed) {
            return Err(Error::out_of_range(
                "elapsed time",
                elapsed,
                0.0,
                self.horizon,
            ));
        }
        let mut rest = elapsed;
        let mut phases = Vec::new();
        for p in &self.phases {
            if rest >= p.duration {
                rest -= p.duration;
                continue;
            }
            phases.push(Phase {
                acceleration: p.acceleration,
                duration: p.duration - rest,
            });
            rest = 0.0;
        }
        Self::new(phases, self.horizon - elapsed)
    }

    /// Acceleration commanded at time `s` (before stop clamping).
    fn commanded_at(&self, s: f64) -> f64 {
        let mut t = 0.0;
        for p in &self.phases {
            t += p.duration;
            if s < t {
                return p.acceleration;
            }
        }
        0.0
    }
}

/// Advance `(x, v)` by `t` seconds at constant acceleration `a`, stopping at
/// rest when braking.
fn advance(x: f64, v: f64, a: f64, t: f64) -> (f64, f64) {
    if a < 0.0 {
        let t_stop = v / -a;
        if t_stop <= t {
            return (x + 0.5 * v * t_stop, 0.0);
        }
    }
    (x + v * t + 0.5 * a * t * t, v + a * t)
}

/// State reached after `s` seconds of following `profile` from `state`.
pub fn predict_state(
    state: &VehicleState,
    profile: &AccelerationProfile,
    s: f64,
) -> Result<VehicleState> {
    if !(s >= -TIME_EPS && s <= profile.horizon + TIME_EPS) {
        return Err(Error::out_of_range(
            "prediction time",
            s,
            0.0,
            profile.horizon,
        ));
    }
    let s = s.clamp(0.0, profile.horizon);
    let mut x = state.path_position;
    let mut v = state.velocity.max(0.0);
    let mut remaining = s;
    for p in &profile.phases {
        if remaining <= 0.0 {
            break;
        }
        let t = remaining.min(p.duration);
        (x, v) = advance(x, v, p.acceleration, t);
        remaining -= t;
    }
    if remaining > 0.0 {
        x += v * remaining;
    }
    let commanded = profile.commanded_at(s);
    let acceleration = if v <= 0.0 && commanded < 0.0 {
        0.0
    } else {
        commanded
    };
    Ok(VehicleState {
        path_position: x,
        velocity: v,
        acceleration,
        timestamp: state.timestamp + s,
        ..*state
    })
}

/// Point on `path` at arc length `path_position`.
pub fn world_position(path: &PathGeometry, path_position: f64) -> Result<Point> {
    path.position_at(path_position)
}

/// Center-to-center distance minus both half lengths, floored at zero.
pub fn gap_between(
    ego: &VehicleState,
    ego_path: &PathGeometry,
    other: &VehicleState,
    other_path: &PathGeometry,
) -> f64 {
    let a = ego_path.position_extrapolated(ego.path_position);
    let b = other_path.position_extrapolated(other.path_position);
    ((b - a).norm() - 0.5 * (ego.length + other.length)).max(0.0)
}

/// A vehicle placed on one of the scene's paths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vehicle {
    pub path: usize,
    pub state: VehicleState,
}

/// Snapshot of the world at one instant: shared paths, the ego vehicle and
/// the surrounding traffic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub paths: Vec<PathGeometry>,
    pub ego: Vehicle,
    pub others: Vec<Vehicle>,
    /// Velocity the ego driver would like to travel at.
    pub ego_desired_velocity: f64,
}

impl Scene {
    pub fn validate(&self) -> Result<()> {
        let n = self.paths.len();
        for v in std::iter::once(&self.ego).chain(&self.others) {
            if v.path >= n {
                return Err(Error::invalid(
                    "scene",
                    format!("path index {} out of {n} paths", v.path),
                ));
            }
            v.state.validate()?;
        }
        if !(self.ego_desired_velocity.is_finite() && self.ego_desired_velocity > 0.0) {
            return Err(Error::invalid("scene", "desired velocity must be > 0"));
        }
        Ok(())
    }

    pub fn ego_path(&self) -> &PathGeometry {
        &self.paths[self.ego.path]
    }

    pub fn path_of(&self, vehicle: &Vehicle) -> &PathGeometry {
        &self.paths[vehicle.path]
    }

    pub fn timestamp(&self) -> f64 {
        self.ego.state.timestamp
    }

    /// The same scene without any other traffic.
    pub fn without_others(&self) -> Self {
        Self {
            others: Vec::new(),
            ..self.clone()
        }
    }
}
