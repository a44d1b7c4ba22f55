//! Driver risk-factor estimation.
//!
//! Two planners bracket the driver: one parametrized as the most defensive
//! driver (α = 1.0) and one as the most confident (α = 0.04). The observed
//! driver acceleration is located between their first-step accelerations and
//! mapped back onto the α axis, either linearly or through a rescaled
//! logistic. When the ego is not interacting with anybody, or the two plans
//! coincide, the driver type cannot be observed and the normal value 0.5 is
//! reported.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::planner::{others_as_agents, plan, predict_others, PlannerConfig};
use crate::risk::{integrated_risk_per_other, PredictedAgent, RiskConfig, RiskFactor};
use crate::scene::{AccelerationProfile, Scene};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interpolation {
    Linear,
    #[default]
    Sigmoid,
}

impl std::str::FromStr for Interpolation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(Self::Linear),
            "sigmoid" => Ok(Self::Sigmoid),
            other => Err(Error::invalid(
                "interpolation",
                format!("`{other}` (expected linear or sigmoid)"),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorConfig {
    pub interpolation: Interpolation,
    /// Logistic steepness k of the sigmoid interpolation.
    pub steepness: f64,
    /// Plans closer than this (m/s²) carry no information.
    pub plan_epsilon: f64,
    /// Minimum defensive integrated risk for a vehicle to count as interacting.
    pub gate_threshold: f64,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            interpolation: Interpolation::Sigmoid,
            steepness: 6.0,
            plan_epsilon: 0.05,
            gate_threshold: 1e-6,
        }
    }
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.steepness.is_finite() && self.steepness > 0.0) {
            return Err(Error::invalid("estimator config", "steepness must be > 0"));
        }
        if !(self.plan_epsilon.is_finite() && self.plan_epsilon >= 0.0) {
            return Err(Error::invalid(
                "estimator config",
                "plan_epsilon must be >= 0",
            ));
        }
        if !(self.gate_threshold.is_finite() && self.gate_threshold >= 0.0) {
            return Err(Error::invalid(
                "estimator config",
                "gate_threshold must be >= 0",
            ));
        }
        Ok(())
    }
}

/// Outcome of one interpolation: a risk factor, or no signal because the
/// bracketing plans agree.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Interpolated {
    Determined(RiskFactor),
    Undetermined,
}

impl Interpolated {
    pub fn or_normal(self) -> RiskFactor {
        match self {
            Interpolated::Determined(a) => a,
            Interpolated::Undetermined => RiskFactor::NORMAL,
        }
    }
}

const SPAN: f64 = RiskFactor::MAX - RiskFactor::MIN;

/// Relative position of `a` between the confident (u = 0) and defensive
/// (u = 1) plans.
fn bracket_position(a: f64, a_def: f64, a_conf: f64, epsilon: f64) -> Option<f64> {
    let width = a_def - a_conf;
    if !(width.abs() > epsilon) {
        return None;
    }
    Some((a - a_conf) / width)
}

fn to_factor(fraction: f64) -> Interpolated {
    let alpha = RiskFactor::MIN + SPAN * fraction;
    match RiskFactor::new(alpha) {
        Ok(a) => Interpolated::Determined(a),
        Err(_) => Interpolated::Undetermined,
    }
}

/// Linear interpolation of the observed acceleration between the plans.
pub fn interpolate_linear(a: f64, a_def: f64, a_conf: f64, epsilon: f64) -> Interpolated {
    match bracket_position(a, a_def, a_conf, epsilon) {
        Some(u) => to_factor(u),
        None => Interpolated::Undetermined,
    }
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Logistic in `u` rescaled to pass through (0, 0), (½, ½) and (1, 1).
pub fn normalized_sigmoid(u: f64, steepness: f64) -> f64 {
    let lo = logistic(-0.5 * steepness);
    let hi = logistic(0.5 * steepness);
    (logistic(steepness * (u - 0.5)) - lo) / (hi - lo)
}

/// Sigmoid-shaped interpolation of the observed acceleration between the plans.
pub fn interpolate_sigmoid(
    a: f64,
    a_def: f64,
    a_conf: f64,
    steepness: f64,
    epsilon: f64,
) -> Interpolated {
    match bracket_position(a, a_def, a_conf, epsilon) {
        Some(u) => to_factor(normalized_sigmoid(u, steepness)),
        None => Interpolated::Undetermined,
    }
}

pub fn interpolate(a: f64, a_def: f64, a_conf: f64, cfg: &EstimatorConfig) -> Interpolated {
    match cfg.interpolation {
        Interpolation::Linear => interpolate_linear(a, a_def, a_conf, cfg.plan_epsilon),
        Interpolation::Sigmoid => {
            interpolate_sigmoid(a, a_def, a_conf, cfg.steepness, cfg.plan_epsilon)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimationSample {
    pub timestamp: f64,
    pub a_def: f64,
    pub a_conf: f64,
    pub a_driver: f64,
    pub alpha_hat: RiskFactor,
    pub interacting: bool,
}

/// Whether any other vehicle puts defensive integrated risk above the gate
/// threshold when the ego keeps its velocity.
pub fn is_interacting(
    scene: &Scene,
    risk_cfg: &RiskConfig,
    planner_cfg: &PlannerConfig,
    cfg: &EstimatorConfig,
) -> Result<bool> {
    if scene.others.is_empty() {
        return Ok(false);
    }
    let cv = AccelerationProfile::constant_velocity(risk_cfg.horizon)?;
    let ego = PredictedAgent::new(scene.ego_path(), scene.ego.state, &cv);
    let predictions = predict_others(scene, planner_cfg.other_prediction, risk_cfg.horizon)?;
    let others = others_as_agents(scene, &predictions);
    let per_other = integrated_risk_per_other(&ego, &others, RiskFactor::DEFENSIVE, risk_cfg)?;
    Ok(per_other.iter().any(|&r| r > cfg.gate_threshold))
}

/// Estimate the driver's risk factor from one observed acceleration.
pub fn estimate_step(
    scene: &Scene,
    a_driver: f64,
    risk_cfg: &RiskConfig,
    planner_cfg: &PlannerConfig,
    cfg: &EstimatorConfig,
) -> Result<EstimationSample> {
    cfg.validate()?;
    let defensive = plan(scene, RiskFactor::DEFENSIVE, risk_cfg, planner_cfg)?;
    let confident = plan(scene, RiskFactor::CONFIDENT, risk_cfg, planner_cfg)?;
    let a_def = defensive.first_step_acceleration;
    let a_conf = confident.first_step_acceleration;
    let interacting = is_interacting(scene, risk_cfg, planner_cfg, cfg)?;
    let alpha_hat = if interacting {
        interpolate(a_driver, a_def, a_conf, cfg).or_normal()
    } else {
        RiskFactor::NORMAL
    };
    Ok(EstimationSample {
        timestamp: scene.timestamp(),
        a_def,
        a_conf,
        a_driver,
        alpha_hat,
        interacting,
    })
}

/// Table-row statistics of a set of estimates against a ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimationSummary {
    pub mean: f64,
    pub std: f64,
    pub diff_to_ground_truth: f64,
    pub n_samples: usize,
}

/// Mean and population standard deviation of the estimated factors.
pub fn summarize(
    samples: &[EstimationSample],
    ground_truth: RiskFactor,
) -> Result<EstimationSummary> {
    summarize_values(samples.iter().map(|s| s.alpha_hat.value()), ground_truth)
}

pub fn summarize_values(
    values: impl IntoIterator<Item = f64>,
    ground_truth: RiskFactor,
) -> Result<EstimationSummary> {
    let values: Vec<f64> = values.into_iter().collect();
    if values.is_empty() {
        return Err(Error::Empty("estimation samples"));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Ok(EstimationSummary {
        mean,
        std: var.sqrt(),
        diff_to_ground_truth: (mean - ground_truth.value()).abs(),
        n_samples: values.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const EPS: f64 = 0.05;

    fn det(i: Interpolated) -> f64 {
        match i {
            Interpolated::Determined(a) => a.value(),
            Interpolated::Undetermined => panic!("undetermined"),
        }
    }

    #[test]
    fn linear_examples() {
        assert_eq!(det(interpolate_linear(-2.0, -2.0, 1.0, EPS)), 1.0);
        assert_eq!(det(interpolate_linear(1.0, -2.0, 1.0, EPS)), 0.04);
        assert!((det(interpolate_linear(-0.5, -2.0, 1.0, EPS)) - 0.52).abs() < 1e-12);
        assert_eq!(det(interpolate_linear(2.0, -2.0, 1.0, EPS)), 0.04);
        assert_eq!(det(interpolate_linear(-5.0, -2.0, 1.0, EPS)), 1.0);
        assert_eq!(
            interpolate_linear(0.3, 0.0, 0.04, EPS),
            Interpolated::Undetermined
        );
        assert_eq!(
            interpolate_linear(0.3, 0.0, 0.04, EPS).or_normal(),
            RiskFactor::NORMAL
        );
    }

    #[test]
    fn sigmoid_anchor_points() {
        assert!(normalized_sigmoid(0.0, 6.0).abs() < 1e-15);
        assert!((normalized_sigmoid(1.0, 6.0) - 1.0).abs() < 1e-15);
        assert!((normalized_sigmoid(0.5, 6.0) - 0.5).abs() < 1e-15);
        let quarter = det(interpolate_sigmoid(0.25, 1.0, 0.0, 6.0, EPS));
        let linear = det(interpolate_linear(0.25, 1.0, 0.0, EPS));
        assert!(quarter > 0.04 && quarter < linear, "{quarter} vs {linear}");
    }

    #[test]
    fn summary_examples() {
        let gt = RiskFactor::DEFENSIVE;
        let s = summarize_values([0.95; 7], gt).unwrap();
        assert!((s.mean - 0.95).abs() < 1e-12 && s.std < 1e-12);
        assert!((s.diff_to_ground_truth - 0.05).abs() < 1e-12);

        let s = summarize_values([0.4, 0.6], RiskFactor::NORMAL).unwrap();
        assert!((s.mean - 0.5).abs() < 1e-12);
        assert!((s.std - 0.1).abs() < 1e-12);
        assert!(s.diff_to_ground_truth < 1e-12);

        assert_eq!(summarize_values([0.3], gt).unwrap().std, 0.0);
        assert!(matches!(summarize(&[], gt), Err(Error::Empty(_))));
    }

    #[test]
    fn interpolation_parses() {
        assert_eq!(
            "linear".parse::<Interpolation>().unwrap(),
            Interpolation::Linear
        );
        assert!("cubic".parse::<Interpolation>().is_err());
    }
}
