//! Risk Maps behavior planner.
//!
//! Candidate behaviors are single acceleration phases from an
//! acceleration × duration grid, each followed by constant velocity. Every
//! candidate is scored with `C = R − U + O` (risk, utility, comfort) and the
//! cheapest one is selected. The same machinery renders the velocity-time
//! risk grid used for visualization.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::risk::{
    footprint_at, instantaneous_risk, integrated_risk, PredictedAgent, RiskConfig, RiskFactor, Role,
};
use crate::scene::{predict_state, AccelerationProfile, Scene, VehicleState};

/// How other vehicles are assumed to behave over the horizon.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OtherPrediction {
    #[default]
    ConstantVelocity,
    /// Keep the currently observed acceleration (stopping at rest).
    ConstantAcceleration,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RiskMapConfig {
    pub time_step: f64,
    pub velocity_step: f64,
    pub max_velocity: f64,
}

impl Default for RiskMapConfig {
    fn default() -> Self {
        Self {
            time_step: 0.1,
            velocity_step: 0.5,
            max_velocity: 25.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlannerConfig {
    /// Candidate phase accelerations (m/s²).
    pub accelerations: Vec<f64>,
    /// Candidate phase durations (s).
    pub durations: Vec<f64>,
    /// k_u: weight of the normalized mean-velocity utility.
    pub utility_gain: f64,
    /// k_o: weight of the mean squared acceleration.
    pub comfort_gain: f64,
    /// k_j: cost per acceleration switch.
    pub switch_penalty: f64,
    #[serde(default)]
    pub other_prediction: OtherPrediction,
    #[serde(default)]
    pub risk_map: RiskMapConfig,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            accelerations: vec![
                -8.0, -6.0, -4.0, -3.0, -2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0, 3.0,
            ],
            durations: vec![1.0, 2.0, 3.0, 4.0],
            utility_gain: 0.002,
            comfort_gain: 1e-4,
            switch_penalty: 2e-5,
            other_prediction: OtherPrediction::ConstantVelocity,
            risk_map: RiskMapConfig::default(),
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self, horizon: f64) -> Result<()> {
        if self.accelerations.is_empty() || self.durations.is_empty() {
            return Err(Error::invalid(
                "planner config",
                "candidate grids must be non-empty",
            ));
        }
        if self.accelerations.iter().any(|a| !a.is_finite()) {
            return Err(Error::invalid("planner config", "non-finite acceleration"));
        }
        if self
            .durations
            .iter()
            .any(|d| !(d.is_finite() && *d > 0.0 && *d <= horizon))
        {
            return Err(Error::invalid(
                "planner config",
                "durations must lie in (0, horizon]",
            ));
        }
        let gains = [self.utility_gain, self.comfort_gain, self.switch_penalty];
        if gains.iter().any(|g| !(g.is_finite() && *g >= 0.0)) {
            return Err(Error::invalid(
                "planner config",
                "gains must be finite and >= 0",
            ));
        }
        let m = &self.risk_map;
        if !(m.time_step > 0.0 && m.velocity_step > 0.0 && m.max_velocity > 0.0) {
            return Err(Error::invalid(
                "risk map config",
                "steps and range must be > 0",
            ));
        }
        Ok(())
    }
}

/// Cost terms of one candidate; `total = risk − utility + comfort`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub risk: f64,
    pub utility: f64,
    pub comfort: f64,
    pub total: f64,
}

impl CostBreakdown {
    pub fn new(risk: f64, utility: f64, comfort: f64) -> Self {
        Self {
            risk,
            utility,
            comfort,
            total: risk - utility + comfort,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub profile: AccelerationProfile,
    pub cost: CostBreakdown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanResult {
    pub best_profile: AccelerationProfile,
    pub best_cost: CostBreakdown,
    pub first_step_acceleration: f64,
    pub all_candidates: Vec<Candidate>,
}

/// Candidate profiles for a vehicle in `current`: the acceleration × duration
/// grid, truncated at standstill and deduplicated.
pub fn generate_profiles(
    current: &VehicleState,
    config: &PlannerConfig,
    horizon: f64,
) -> Result<Vec<AccelerationProfile>> {
    config.validate(horizon)?;
    let mut out: Vec<AccelerationProfile> = Vec::new();
    for &a in &config.accelerations {
        for &d in &config.durations {
            let p = AccelerationProfile::single(a, d, horizon)?.normalized(current.velocity);
            if !out.contains(&p) {
                out.push(p);
            }
        }
    }
    Ok(out)
}

/// Predicted profiles for the other vehicles of `scene`.
pub fn predict_others(
    scene: &Scene,
    prediction: OtherPrediction,
    horizon: f64,
) -> Result<Vec<AccelerationProfile>> {
    scene
        .others
        .iter()
        .map(|v| match prediction {
            OtherPrediction::ConstantVelocity => AccelerationProfile::constant_velocity(horizon),
            OtherPrediction::ConstantAcceleration => {
                AccelerationProfile::single(v.state.acceleration, horizon, horizon)
                    .map(|p| p.normalized(v.state.velocity))
            }
        })
        .collect()
}

pub(crate) fn others_as_agents<'a>(
    scene: &'a Scene,
    profiles: &'a [AccelerationProfile],
) -> Vec<PredictedAgent<'a>> {
    scene
        .others
        .iter()
        .zip(profiles)
        .map(|(v, p)| PredictedAgent::new(scene.path_of(v), v.state, p))
        .collect()
}

/// Number of acceleration changes along the profile, including the change
/// into the terminal constant-velocity segment.
fn switch_count(profile: &AccelerationProfile) -> usize {
    let mut accels: Vec<f64> = profile.phases().iter().map(|p| p.acceleration).collect();
    if profile.phase_duration() < profile.horizon() - 1e-9 {
        accels.push(0.0);
    }
    accels.windows(2).filter(|w| w[0] != w[1]).count()
}

fn utility_and_comfort(
    state: &VehicleState,
    profile: &AccelerationProfile,
    desired_velocity: f64,
    config: &PlannerConfig,
) -> Result<(f64, f64)> {
    let horizon = profile.horizon();
    let end = predict_state(state, profile, horizon)?;
    let mean_velocity = (end.path_position - state.path_position) / horizon;
    let utility = config.utility_gain * (mean_velocity / desired_velocity).min(1.0);
    let mean_sq_accel = profile
        .phases()
        .iter()
        .map(|p| p.acceleration * p.acceleration * p.duration)
        .sum::<f64>()
        / horizon;
    let comfort =
        config.comfort_gain * mean_sq_accel + config.switch_penalty * switch_count(profile) as f64;
    Ok((utility, comfort))
}

fn evaluate_with(
    profile: &AccelerationProfile,
    scene: &Scene,
    others: &[PredictedAgent<'_>],
    alpha: RiskFactor,
    risk_cfg: &RiskConfig,
    config: &PlannerConfig,
) -> Result<CostBreakdown> {
    let profile = profile.normalized(scene.ego.state.velocity);
    let ego = PredictedAgent::new(scene.ego_path(), scene.ego.state, &profile);
    let risk = integrated_risk(&ego, others, alpha, risk_cfg)?;
    let (utility, comfort) = utility_and_comfort(
        &scene.ego.state,
        &profile,
        scene.ego_desired_velocity,
        config,
    )?;
    Ok(CostBreakdown::new(risk, utility, comfort))
}

/// Score one ego behavior in `scene` under risk factor `alpha`.
pub fn evaluate_cost(
    profile: &AccelerationProfile,
    scene: &Scene,
    alpha: RiskFactor,
    risk_cfg: &RiskConfig,
    config: &PlannerConfig,
) -> Result<CostBreakdown> {
    let predictions = predict_others(scene, config.other_prediction, risk_cfg.horizon)?;
    let others = others_as_agents(scene, &predictions);
    evaluate_with(profile, scene, &others, alpha, risk_cfg, config)
}

/// Total order used to pick the best candidate: lowest cost, then smallest
/// |acceleration|, then longest phase, then lowest acceleration.
fn preference(a: &Candidate, b: &Candidate) -> std::cmp::Ordering {
    let (pa, pb) = (&a.profile, &b.profile);
    a.cost
        .total
        .total_cmp(&b.cost.total)
        .then(
            pa.first_acceleration()
                .abs()
                .total_cmp(&pb.first_acceleration().abs()),
        )
        .then(pb.phase_duration().total_cmp(&pa.phase_duration()))
        .then(pa.first_acceleration().total_cmp(&pb.first_acceleration()))
}

/// Evaluate every candidate and return the argmin of the total cost.
pub fn plan(
    scene: &Scene,
    alpha: RiskFactor,
    risk_cfg: &RiskConfig,
    config: &PlannerConfig,
) -> Result<PlanResult> {
    scene.validate()?;
    let profiles = generate_profiles(&scene.ego.state, config, risk_cfg.horizon)?;
    plan_among(scene, profiles, alpha, risk_cfg, config)
}

/// [`plan`] over an explicit candidate list.
pub fn plan_among(
    scene: &Scene,
    profiles: Vec<AccelerationProfile>,
    alpha: RiskFactor,
    risk_cfg: &RiskConfig,
    config: &PlannerConfig,
) -> Result<PlanResult> {
    if profiles.is_empty() {
        return Err(Error::Empty("candidate list"));
    }
    let predictions = predict_others(scene, config.other_prediction, risk_cfg.horizon)?;
    let others = others_as_agents(scene, &predictions);
    let all_candidates = profiles
        .into_par_iter()
        .map(|profile| {
            let cost = evaluate_with(&profile, scene, &others, alpha, risk_cfg, config)?;
            Ok(Candidate { profile, cost })
        })
        .collect::<Result<Vec<_>>>()?;
    let best = all_candidates
        .iter()
        .min_by(|a, b| preference(a, b))
        .expect("non-empty")
        .clone();
    Ok(PlanResult {
        first_step_acceleration: best.profile.first_acceleration(),
        best_profile: best.profile,
        best_cost: best.cost,
        all_candidates,
    })
}

/// Labeled velocity-vs-time curve drawn on top of a risk map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Overlay {
    pub label: String,
    /// Velocity at each entry of the grid's time axis.
    pub velocities: Vec<f64>,
}

/// Risk densities over the (velocity × future time) plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskMapGrid {
    pub time_axis: Vec<f64>,
    pub velocity_axis: Vec<f64>,
    /// `risk_values[i][j]` belongs to `velocity_axis[i]`, `time_axis[j]`.
    pub risk_values: Vec<Vec<f64>>,
    #[serde(default)]
    pub overlay_trajectories: Vec<Overlay>,
}

impl RiskMapGrid {
    /// Number of cells whose risk exceeds `threshold`.
    pub fn cells_above(&self, threshold: f64) -> usize {
        self.risk_values
            .iter()
            .flatten()
            .filter(|&&r| r > threshold)
            .count()
    }

    pub fn row_mean(&self, row: usize) -> f64 {
        let r = &self.risk_values[row];
        r.iter().sum::<f64>() / r.len() as f64
    }

    /// Long-format CSV with header `time,velocity,risk`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("time,velocity,risk\n");
        for (i, v) in self.velocity_axis.iter().enumerate() {
            for (j, t) in self.time_axis.iter().enumerate() {
                out.push_str(&format!("{t},{v},{:e}\n", self.risk_values[i][j]));
            }
        }
        out
    }

    /// Adds the velocity curve of `profile` started from `state`.
    pub fn add_profile_overlay(
        &mut self,
        label: impl Into<String>,
        state: &VehicleState,
        profile: &AccelerationProfile,
    ) -> Result<()> {
        let velocities = self
            .time_axis
            .iter()
            .map(|&t| predict_state(state, profile, t.min(profile.horizon())).map(|p| p.velocity))
            .collect::<Result<Vec<_>>>()?;
        self.overlay_trajectories.push(Overlay {
            label: label.into(),
            velocities,
        });
        Ok(())
    }
}

fn axis(step: f64, end: f64) -> Vec<f64> {
    let n = (end / step + 1e-9).floor() as usize;
    (0..=n).map(|k| k as f64 * step).collect()
}

/// Risk densities for the family of constant-acceleration behaviors that
/// reach velocity `v` at time `s`, one behavior per grid cell. The
/// constant-velocity behavior is added as an overlay.
pub fn render_risk_map(
    scene: &Scene,
    alpha: RiskFactor,
    risk_cfg: &RiskConfig,
    config: &PlannerConfig,
) -> Result<RiskMapGrid> {
    scene.validate()?;
    risk_cfg.validate()?;
    config.validate(risk_cfg.horizon)?;
    let map = &config.risk_map;
    let time_axis = axis(map.time_step, risk_cfg.horizon);
    let velocity_axis = axis(map.velocity_step, map.max_velocity);
    let predictions = predict_others(scene, config.other_prediction, risk_cfg.horizon)?;
    let others = others_as_agents(scene, &predictions);
    let params = &risk_cfg.uncertainty;
    let ego = scene.ego.state;
    let ego_path = scene.ego_path();

    // footprints of the others only depend on time
    let other_prints = time_axis
        .iter()
        .map(|&s| {
            others
                .iter()
                .map(|o| o.footprint(s, alpha, params, Role::Other))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;

    let risk_values = velocity_axis
        .par_iter()
        .map(|&v| {
            time_axis
                .iter()
                .zip(&other_prints)
                .map(|(&s, prints)| {
                    let x = ego.path_position + 0.5 * (ego.velocity + v) * s;
                    let e = footprint_at(ego_path, x, v, s, alpha, params, Role::Ego);
                    prints
                        .iter()
                        .try_fold(0.0, |acc, o| Ok(acc + instantaneous_risk(&e, o)?))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;

    let mut grid = RiskMapGrid {
        time_axis,
        velocity_axis,
        risk_values,
        overlay_trajectories: Vec::new(),
    };
    let cv = AccelerationProfile::constant_velocity(risk_cfg.horizon)?;
    grid.add_profile_overlay("constant_velocity", &ego, &cv)?;
    Ok(grid)
}
