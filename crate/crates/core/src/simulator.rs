//! Closed-loop scenario simulation.
//!
//! The ego driver is itself a Risk Maps planner parametrized with the
//! ground-truth risk factor of its driver type. At every step it re-plans and
//! applies the first step of the best behavior (receding horizon). Other
//! vehicles follow scripted acceleration schedules. On every snapshot the
//! estimator and both warning systems observe the ego driver, so a trace
//! holds everything behind the estimation and warning plots.

use serde::{Deserialize, Serialize};

use crate::config::EngineConfig;
use crate::error::{Error, Result};
use crate::estimator::{estimate_step, EstimationSample};
use crate::planner::{plan, PlanResult};
use crate::risk::RiskFactor;
use crate::scene::{predict_state, PathGeometry, Scene, Vehicle, VehicleState};
use crate::warning::{baseline_signal, warning_signal, WarningRecord};

/// Ground-truth driver type of the simulated ego driver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DriverType {
    Defensive,
    Normal,
    Confident,
    Custom(RiskFactor),
}

impl DriverType {
    pub const ANCHORS: [DriverType; 3] = [
        DriverType::Defensive,
        DriverType::Normal,
        DriverType::Confident,
    ];

    pub fn alpha(self) -> RiskFactor {
        match self {
            DriverType::Defensive => RiskFactor::DEFENSIVE,
            DriverType::Normal => RiskFactor::NORMAL,
            DriverType::Confident => RiskFactor::CONFIDENT,
            DriverType::Custom(a) => a,
        }
    }

    pub fn label(self) -> String {
        match self {
            DriverType::Defensive => "defensive".into(),
            DriverType::Normal => "normal".into(),
            DriverType::Confident => "confident".into(),
            DriverType::Custom(a) => format!("alpha={a}"),
        }
    }
}

impl std::fmt::Display for DriverType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.label())
    }
}

impl std::str::FromStr for DriverType {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "defensive" => Ok(Self::Defensive),
            "normal" => Ok(Self::Normal),
            "confident" => Ok(Self::Confident),
            other => {
                let raw = other.strip_prefix("alpha=").ok_or_else(|| {
                    Error::invalid(
                        "driver",
                        format!(
                            "`{other}` (expected defensive, normal, confident or alpha=<float>)"
                        ),
                    )
                })?;
                let a: f64 = raw
                    .parse()
                    .map_err(|_| Error::invalid("driver", format!("bad alpha `{raw}`")))?;
                Ok(Self::Custom(RiskFactor::new(a)?))
            }
        }
    }
}

impl Serialize for DriverType {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.label())
    }
}

impl<'de> Deserialize<'de> for DriverType {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Constant acceleration applied on `[t_start, t_end)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScriptEntry {
    pub t_start: f64,
    pub t_end: f64,
    pub acceleration: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EgoSpec {
    pub path: usize,
    pub position: f64,
    pub velocity: f64,
    pub desired_velocity: f64,
    #[serde(default = "default_length")]
    pub length: f64,
    #[serde(default = "default_width")]
    pub width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OtherSpec {
    pub path: usize,
    pub position: f64,
    pub velocity: f64,
    #[serde(default = "default_length")]
    pub length: f64,
    #[serde(default = "default_width")]
    pub width: f64,
    /// Scripted accelerations as `[t_start, t_end, acceleration]` triples.
    #[serde(default, with = "script_triples")]
    pub script: Vec<ScriptEntry>,
}

fn default_length() -> f64 {
    4.5
}

fn default_width() -> f64 {
    1.8
}

mod script_triples {
    use super::ScriptEntry;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[ScriptEntry], s: S) -> Result<S::Ok, S::Error> {
        let triples: Vec<[f64; 3]> = v
            .iter()
            .map(|e| [e.t_start, e.t_end, e.acceleration])
            .collect();
        triples.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<ScriptEntry>, D::Error> {
        let triples = Vec::<[f64; 3]>::deserialize(d)?;
        Ok(triples
            .into_iter()
            .map(|[t_start, t_end, acceleration]| ScriptEntry {
                t_start,
                t_end,
                acceleration,
            })
            .collect())
    }
}

/// Everything needed to run one closed-loop simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub name: String,
    /// Free-form layout tag, e.g. `following` or `intersection`.
    pub topology: String,
    /// Free-form risk level tag, e.g. `high` or `medium`.
    pub variant: String,
    pub driver: DriverType,
    /// Risk factor used by the personalized warning; defaults to the
    /// driver's ground truth.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning_alpha: Option<RiskFactor>,
    pub driver_wants_warning: bool,
    pub duration: f64,
    pub step: f64,
    /// Time after which the ego no longer interacts with anybody.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interaction_ends_at: Option<f64>,
    pub paths: Vec<PathGeometry>,
    pub ego: EgoSpec,
    #[serde(default)]
    pub others: Vec<OtherSpec>,
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return Err(Error::invalid("scenario", "duration must be > 0"));
        }
        if !(self.step.is_finite() && self.step > 0.0 && self.step <= self.duration) {
            return Err(Error::invalid("scenario", "step must be in (0, duration]"));
        }
        let ratio = self.duration / self.step;
        if (ratio - ratio.round()).abs() > 1e-6 {
            return Err(Error::invalid(
                "scenario",
                "duration must be a whole number of steps",
            ));
        }
        for script in self.others.iter().flat_map(|o| &o.script) {
            if !(script.t_start.is_finite()
                && script.t_end.is_finite()
                && script.acceleration.is_finite()
                && script.t_end >= script.t_start)
            {
                return Err(Error::invalid(
                    "scenario",
                    "script entries need t_end >= t_start",
                ));
            }
        }
        self.initial_scene()?.validate()
    }

    pub fn steps(&self) -> usize {
        (self.duration / self.step).round() as usize
    }

    pub fn warning_alpha(&self) -> RiskFactor {
        self.warning_alpha.unwrap_or_else(|| self.driver.alpha())
    }

    /// Same scenario driven by another driver type.
    pub fn with_driver(&self, driver: DriverType) -> Self {
        Self {
            driver,
            ..self.clone()
        }
    }

    pub fn initial_scene(&self) -> Result<Scene> {
        let ego = Vehicle {
            path: self.ego.path,
            state: VehicleState::new(self.ego.position, self.ego.velocity)
                .with_footprint(self.ego.length, self.ego.width),
        };
        let others = self
            .others
            .iter()
            .map(|o| Vehicle {
                path: o.path,
                state: VehicleState {
                    acceleration: script_acceleration(&o.script, 0.0),
                    ..VehicleState::new(o.position, o.velocity).with_footprint(o.length, o.width)
                },
            })
            .collect();
        let scene = Scene {
            paths: self.paths.clone(),
            ego,
            others,
            ego_desired_velocity: self.ego.desired_velocity,
        };
        scene.validate()?;
        Ok(scene)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse {
            path: self.name.clone(),
            message: e.to_string(),
        })
    }

    pub fn from_toml(text: &str, origin: &str) -> Result<Self> {
        let spec: Self = toml::from_str(text).map_err(|e| Error::Parse {
            path: origin.to_string(),
            message: e.to_string(),
        })?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text, &path.display().to_string())
    }
}

/// Scripted acceleration at time `t` (first matching entry wins).
pub fn script_acceleration(script: &[ScriptEntry], t: f64) -> f64 {
    script
        .iter()
        .find(|e| e.t_start <= t && t < e.t_end)
        .map_or(0.0, |e| e.acceleration)
}

/// Advance a scripted vehicle from `t` to `t + h`, splitting the interval at
/// script boundaries and stopping at rest.
fn advance_scripted(state: &VehicleState, script: &[ScriptEntry], t: f64, h: f64) -> VehicleState {
    let end = t + h;
    let mut cuts: Vec<f64> = script
        .iter()
        .flat_map(|e| [e.t_start, e.t_end])
        .filter(|&c| c > t && c < end)
        .collect();
    cuts.push(end);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();

    let (mut x, mut v) = (state.path_position, state.velocity);
    let mut now = t;
    for cut in cuts {
        let a = script_acceleration(script, now);
        let dt = cut - now;
        if a < 0.0 && v + a * dt <= 0.0 {
            x += 0.5 * v * (v / -a);
            v = 0.0;
        } else {
            x += v * dt + 0.5 * a * dt * dt;
            v += a * dt;
        }
        now = cut;
    }
    let a_next = script_acceleration(script, end);
    VehicleState {
        path_position: x,
        velocity: v,
        acceleration: if v <= 0.0 && a_next < 0.0 {
            0.0
        } else {
            a_next
        },
        timestamp: end,
        ..*state
    }
}

/// Mutable simulation state between steps.
#[derive(Debug, Clone, PartialEq)]
pub struct World {
    pub scene: Scene,
    pub scripts: Vec<Vec<ScriptEntry>>,
}

impl World {
    pub fn from_spec(spec: &ScenarioSpec) -> Result<Self> {
        spec.validate()?;
        Ok(Self {
            scene: spec.initial_scene()?,
            scripts: spec.others.iter().map(|o| o.script.clone()).collect(),
        })
    }

    pub fn time(&self) -> f64 {
        self.scene.timestamp()
    }
}

/// Result of advancing the world by one step.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub next: World,
    pub applied_acceleration: f64,
    pub plan: PlanResult,
}

/// What the driver does in `world`: the plan of a Risk Maps driver with
/// factor `ego_alpha`.
pub fn driver_plan(world: &World, ego_alpha: RiskFactor, cfg: &EngineConfig) -> Result<PlanResult> {
    plan(&world.scene, ego_alpha, &cfg.risk, &cfg.planner)
}

/// Apply `plan` to the ego and the scripts to everybody else for `h` seconds.
/// The next snapshot is stamped `next_time`, which keeps timestamps on an
/// exact arithmetic grid.
pub fn advance(world: &World, plan: &PlanResult, h: f64, next_time: f64) -> Result<World> {
    let t = world.time();
    let mut next = world.clone();
    let ego = predict_state(&world.scene.ego.state, &plan.best_profile, h)?;
    next.scene.ego.state = VehicleState {
        acceleration: plan.first_step_acceleration,
        timestamp: next_time,
        ..ego
    };
    for (vehicle, script) in next.scene.others.iter_mut().zip(&world.scripts) {
        vehicle.state = VehicleState {
            timestamp: next_time,
            ..advance_scripted(&vehicle.state, script, t, h)
        };
    }
    Ok(next)
}

/// Re-plan for the ego driver and advance everything by `h` seconds.
pub fn step(
    world: &World,
    ego_alpha: RiskFactor,
    h: f64,
    cfg: &EngineConfig,
) -> Result<StepOutcome> {
    let plan = driver_plan(world, ego_alpha, cfg)?;
    let next = advance(world, &plan, h, world.time() + h)?;
    Ok(StepOutcome {
        next,
        applied_acceleration: plan.first_step_acceleration,
        plan,
    })
}

/// Positions of all vehicles at one instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub timestamp: f64,
    pub ego: VehicleState,
    pub others: Vec<VehicleState>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationTrace {
    pub scenario: String,
    pub driver: DriverType,
    pub warning_alpha: RiskFactor,
    pub snapshots: Vec<Snapshot>,
    /// Acceleration the ego driver chose at each snapshot.
    pub ego_accelerations: Vec<f64>,
    pub estimation: Vec<EstimationSample>,
    pub warnings: Vec<WarningRecord>,
}

impl SimulationTrace {
    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        self.snapshots.iter().map(|s| s.timestamp)
    }
}

/// Scene of `spec` at the last simulation step not after `time`, with the
/// ego driven by its own driver type.
pub fn scene_at(spec: &ScenarioSpec, time: f64, cfg: &EngineConfig) -> Result<Scene> {
    cfg.validate()?;
    if !(0.0..=spec.duration).contains(&time) {
        return Err(Error::out_of_range("time", time, 0.0, spec.duration));
    }
    let mut world = World::from_spec(spec)?;
    let steps = ((time / spec.step) + 1e-9).floor() as usize;
    for k in 0..steps.min(spec.steps()) {
        let plan = driver_plan(&world, spec.driver.alpha(), cfg)?;
        world = advance(&world, &plan, spec.step, (k + 1) as f64 * spec.step)?;
    }
    Ok(world.scene)
}

/// Run `spec` to completion. Every snapshot, including the last one, is
/// observed by the estimator and both warning systems.
pub fn run(spec: &ScenarioSpec, cfg: &EngineConfig) -> Result<SimulationTrace> {
    cfg.validate()?;
    let mut world = World::from_spec(spec)?;
    let n = spec.steps();
    let driver_alpha = spec.driver.alpha();
    let warning_alpha = spec.warning_alpha();
    let mut trace = SimulationTrace {
        scenario: spec.name.clone(),
        driver: spec.driver,
        warning_alpha,
        snapshots: Vec::with_capacity(n + 1),
        ego_accelerations: Vec::with_capacity(n + 1),
        estimation: Vec::with_capacity(n + 1),
        warnings: Vec::with_capacity(n + 1),
    };
    for k in 0..=n {
        let scene = &world.scene;
        let driver = driver_plan(&world, driver_alpha, cfg)?;
        let a_driver = driver.first_step_acceleration;
        let sample = estimate_step(scene, a_driver, &cfg.risk, &cfg.planner, &cfg.estimator)?;
        let personalized =
            warning_signal(scene, warning_alpha, &cfg.risk, &cfg.planner, &cfg.warning)?;
        let baseline = baseline_signal(scene, &cfg.risk, &cfg.planner, &cfg.warning)?;
        trace.snapshots.push(Snapshot {
            timestamp: scene.timestamp(),
            ego: scene.ego.state,
            others: scene.others.iter().map(|o| o.state).collect(),
        });
        trace.ego_accelerations.push(a_driver);
        trace.estimation.push(sample);
        trace.warnings.push(WarningRecord::new(
            scene.timestamp(),
            personalized,
            baseline,
            spec.driver_wants_warning,
        ));
        if k < n {
            let next_time = (k + 1) as f64 * spec.step;
            world = advance(&world, &driver, spec.step, next_time)?;
        }
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn driver_type_parsing() {
        assert_eq!(
            "defensive".parse::<DriverType>().unwrap(),
            DriverType::Defensive
        );
        let custom: DriverType = "alpha=0.3".parse().unwrap();
        assert_eq!(custom.alpha().value(), 0.3);
        assert_eq!(custom.label(), "alpha=0.3");
        assert!("reckless".parse::<DriverType>().is_err());
        assert!("alpha=x".parse::<DriverType>().is_err());
    }

    #[test]
    fn scripted_braking_velocity_drop() {
        let state = VehicleState::new(0.0, 15.0);
        let script = [ScriptEntry {
            t_start: 1.0,
            t_end: 3.0,
            acceleration: -3.0,
        }];
        let next = advance_scripted(&state, &script, 1.5, 0.1);
        assert!((next.velocity - (15.0 - 0.3)).abs() < 1e-12);
        // interval straddling the start of the script
        let next = advance_scripted(&state, &script, 0.95, 0.1);
        assert!((next.velocity - (15.0 - 0.15)).abs() < 1e-12);
        assert!((next.path_position - (1.5 - 0.5 * 3.0 * 0.05 * 0.05)).abs() < 1e-12);
    }

    #[test]
    fn scripted_vehicle_stops() {
        let state = VehicleState::new(0.0, 0.2);
        let script = [ScriptEntry {
            t_start: 0.0,
            t_end: 10.0,
            acceleration: -4.0,
        }];
        let next = advance_scripted(&state, &script, 0.0, 0.1);
        assert_eq!(next.velocity, 0.0);
        assert!((next.path_position - 0.005).abs() < 1e-12);
        assert_eq!(next.acceleration, 0.0);
    }

    #[test]
    fn zero_length_entries_do_nothing() {
        let state = VehicleState::new(3.0, 0.0);
        let script = [ScriptEntry {
            t_start: 0.5,
            t_end: 0.5,
            acceleration: -3.0,
        }];
        let next = advance_scripted(&state, &script, 0.0, 1.0);
        assert_eq!((next.path_position, next.velocity), (3.0, 0.0));
    }

    #[test]
    fn scene_at_replays_the_run() {
        let mut spec = crate::scenarios::find_builtin("following-high-defensive", None).unwrap();
        spec.duration = 1.0;
        let cfg = EngineConfig::default();
        let trace = run(&spec, &cfg).unwrap();
        let scene = scene_at(&spec, 0.75, &cfg).unwrap();
        let snap = &trace.snapshots[7];
        assert_eq!(scene.ego.state.path_position, snap.ego.path_position);
        assert_eq!(scene.others[0].state.velocity, snap.others[0].velocity);
        assert!(scene_at(&spec, 1.5, &cfg).is_err());
    }
}
