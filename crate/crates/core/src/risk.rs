//! Gaussian collision-risk model.
//!
//! Each vehicle's predicted position at future time `s` is a 2-D Gaussian
//! centered on its mean prediction. The longitudinal spread grows with the
//! vehicle's velocity and elapsed time and saturates at a cap proportional to
//! the personalized risk factor α:
//!
//! ```text
//! σ_lon(s) = min(σ_min + g · v · s, α · c_role · σ_max)
//! ```
//!
//! The instantaneous risk of a pair is the overlap of their Gaussians,
//! `det(2π(Σ₁+Σ₂))^{-1/2} · exp(-½ Δμᵀ (Σ₁+Σ₂)⁻¹ Δμ)`, and the scalar risk of
//! a behavior is the survival-discounted left-Riemann sum of that overlap
//! over the prediction horizon.

use std::f64::consts::PI;

use nalgebra::Matrix2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scene::{predict_state, AccelerationProfile, PathGeometry, Point, VehicleState};

/// Personalized risk factor, always within `[CONFIDENT, DEFENSIVE]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct RiskFactor(f64);

impl RiskFactor {
    pub const MIN: f64 = 0.04;
    pub const MAX: f64 = 1.0;
    pub const DEFENSIVE: RiskFactor = RiskFactor(1.0);
    pub const NORMAL: RiskFactor = RiskFactor(0.5);
    pub const CONFIDENT: RiskFactor = RiskFactor(0.04);

    /// Clamps `alpha` into the admissible range; rejects non-finite input.
    pub fn new(alpha: f64) -> Result<Self> {
        if !alpha.is_finite() {
            return Err(Error::invalid(
                "risk factor",
                format!("{alpha} is not finite"),
            ));
        }
        Ok(Self(alpha.clamp(Self::MIN, Self::MAX)))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for RiskFactor {
    type Error = Error;
    fn try_from(v: f64) -> Result<Self> {
        Self::new(v)
    }
}

impl From<RiskFactor> for f64 {
    fn from(a: RiskFactor) -> f64 {
        a.0
    }
}

impl std::fmt::Display for RiskFactor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Whose uncertainty is being modeled; selects the cap multiplier.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Ego,
    Other,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UncertaintyParams {
    /// Longitudinal standard deviation at s = 0 (m).
    pub sigma_min: f64,
    /// Growth of the longitudinal std per unit velocity and time.
    pub growth_rate: f64,
    /// Longitudinal std cap at α = 1 (m).
    pub sigma_max_scale: f64,
    /// Fixed lateral std (m).
    pub lateral_sigma: f64,
    #[serde(default = "one")]
    pub ego_cap_multiplier: f64,
    #[serde(default = "one")]
    pub other_cap_multiplier: f64,
}

fn one() -> f64 {
    1.0
}

impl Default for UncertaintyParams {
    fn default() -> Self {
        Self {
            sigma_min: 0.5,
            growth_rate: 0.15,
            sigma_max_scale: 10.0,
            lateral_sigma: 0.5,
            ego_cap_multiplier: 1.0,
            other_cap_multiplier: 1.0,
        }
    }
}

impl UncertaintyParams {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.sigma_min,
            self.growth_rate,
            self.sigma_max_scale,
            self.lateral_sigma,
            self.ego_cap_multiplier,
            self.other_cap_multiplier,
        ];
        if all.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::invalid(
                "uncertainty params",
                "all parameters must be finite and > 0",
            ));
        }
        Ok(())
    }

    fn cap_multiplier(&self, role: Role) -> f64 {
        match role {
            Role::Ego => self.ego_cap_multiplier,
            Role::Other => self.other_cap_multiplier,
        }
    }

    /// Longitudinal standard deviation for `role` after `s` seconds.
    pub fn longitudinal_sigma(&self, alpha: RiskFactor, velocity: f64, s: f64, role: Role) -> f64 {
        let grown = self.sigma_min + self.growth_rate * velocity.max(0.0) * s;
        let cap = alpha.value() * self.cap_multiplier(role) * self.sigma_max_scale;
        grown.min(cap)
    }

    /// Covariance in world coordinates for a vehicle heading along `heading`.
    pub fn covariance(
        &self,
        alpha: RiskFactor,
        velocity: f64,
        s: f64,
        heading: f64,
        role: Role,
    ) -> Matrix2<f64> {
        let lon = self.longitudinal_sigma(alpha, velocity, s, role);
        rotated_diag(lon * lon, self.lateral_sigma * self.lateral_sigma, heading)
    }
}

/// `R diag(a, b) Rᵀ` for the rotation by `heading`.
fn rotated_diag(a: f64, b: f64, heading: f64) -> Matrix2<f64> {
    let (sin, cos) = heading.sin_cos();
    let xx = a * cos * cos + b * sin * sin;
    let yy = a * sin * sin + b * cos * cos;
    let xy = (a - b) * sin * cos;
    Matrix2::new(xx, xy, xy, yy)
}

/// Covariance of a vehicle moving at `velocity`, `s` seconds into the
/// prediction, with the cap multiplier fixed to one.
pub fn uncertainty_at(
    alpha: RiskFactor,
    velocity: f64,
    s: f64,
    params: &UncertaintyParams,
    heading: f64,
) -> Result<Matrix2<f64>> {
    if !(s >= 0.0) {
        return Err(Error::out_of_range(
            "prediction time",
            s,
            0.0,
            f64::INFINITY,
        ));
    }
    if !(velocity >= 0.0) {
        return Err(Error::out_of_range(
            "velocity",
            velocity,
            0.0,
            f64::INFINITY,
        ));
    }
    let neutral = UncertaintyParams {
        ego_cap_multiplier: 1.0,
        other_cap_multiplier: 1.0,
        ..*params
    };
    Ok(neutral.covariance(alpha, velocity, s, heading, Role::Ego))
}

/// Position distribution of one vehicle at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianFootprint {
    pub mean: Point,
    pub covariance: Matrix2<f64>,
}

impl GaussianFootprint {
    pub fn new(mean: Point, covariance: Matrix2<f64>) -> Self {
        Self { mean, covariance }
    }
}

/// Smallest determinant of `Σ₁+Σ₂` accepted as non-singular.
const MIN_DET: f64 = 1e-18;

/// Overlap density of two Gaussian footprints.
pub fn instantaneous_risk(ego: &GaussianFootprint, other: &GaussianFootprint) -> Result<f64> {
    let sum = ego.covariance + other.covariance;
    let det = sum.determinant();
    if !(det.is_finite() && det > MIN_DET) || sum[(0, 0)] <= 0.0 {
        return Err(Error::Degenerate { det });
    }
    let d = other.mean - ego.mean;
    // closed-form inverse of a symmetric 2x2
    let maha =
        (sum[(1, 1)] * d.x * d.x - 2.0 * sum[(0, 1)] * d.x * d.y + sum[(0, 0)] * d.y * d.y) / det;
    Ok((-0.5 * maha).exp() / (2.0 * PI * det.sqrt()))
}

/// Constant-rate survival discount.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurvivalParams {
    /// Time constant of the discount (s).
    pub tau: f64,
}

impl Default for SurvivalParams {
    fn default() -> Self {
        Self { tau: 2.0 }
    }
}

impl SurvivalParams {
    pub fn weight(&self, s: f64) -> f64 {
        (-s / self.tau).exp()
    }
}

/// Everything needed to turn predicted trajectories into a scalar risk.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RiskConfig {
    pub uncertainty: UncertaintyParams,
    pub survival: SurvivalParams,
    /// Prediction horizon (s).
    pub horizon: f64,
    /// Quadrature step (s).
    pub dt: f64,
}

impl Default for RiskConfig {
    fn default() -> Self {
        Self {
            uncertainty: UncertaintyParams::default(),
            survival: SurvivalParams::default(),
            horizon: 10.0,
            dt: 0.1,
        }
    }
}

impl RiskConfig {
    pub fn validate(&self) -> Result<()> {
        self.uncertainty.validate()?;
        if !(self.survival.tau.is_finite() && self.survival.tau > 0.0) {
            return Err(Error::invalid("survival params", "tau must be > 0"));
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(Error::invalid("risk config", "horizon must be > 0"));
        }
        if !(self.dt.is_finite() && self.dt > 0.0 && self.dt <= self.horizon) {
            return Err(Error::invalid("risk config", "dt must be in (0, horizon]"));
        }
        Ok(())
    }

    /// Quadrature nodes `k·dt` strictly below the horizon.
    pub fn time_grid(&self) -> impl Iterator<Item = f64> + '_ {
        let n = quadrature_steps(self.horizon, self.dt);
        (0..n).map(move |k| k as f64 * self.dt)
    }
}

pub(crate) fn quadrature_steps(horizon: f64, dt: f64) -> usize {
    (horizon / dt - 1e-9).ceil().max(1.0) as usize
}

/// A vehicle together with the behavior it is predicted to follow.
#[derive(Debug, Clone, Copy)]
pub struct PredictedAgent<'a> {
    pub path: &'a PathGeometry,
    pub state: VehicleState,
    pub profile: &'a AccelerationProfile,
}

impl<'a> PredictedAgent<'a> {
    pub fn new(
        path: &'a PathGeometry,
        state: VehicleState,
        profile: &'a AccelerationProfile,
    ) -> Self {
        Self {
            path,
            state,
            profile,
        }
    }

    /// Gaussian footprint `s` seconds ahead.
    pub fn footprint(
        &self,
        s: f64,
        alpha: RiskFactor,
        params: &UncertaintyParams,
        role: Role,
    ) -> Result<GaussianFootprint> {
        let p = predict_state(&self.state, self.profile, s)?;
        Ok(footprint_at(
            self.path,
            p.path_position,
            p.velocity,
            s,
            alpha,
            params,
            role,
        ))
    }
}

/// Footprint of a vehicle at arc length `path_position` moving at `velocity`,
/// `s` seconds into the prediction.
pub fn footprint_at(
    path: &PathGeometry,
    path_position: f64,
    velocity: f64,
    s: f64,
    alpha: RiskFactor,
    params: &UncertaintyParams,
    role: Role,
) -> GaussianFootprint {
    let mean = path.position_extrapolated(path_position);
    let heading = path.heading_at(path_position);
    GaussianFootprint::new(mean, params.covariance(alpha, velocity, s, heading, role))
}

/// Discounted risk contributed by each other vehicle, in input order.
pub fn integrated_risk_per_other(
    ego: &PredictedAgent<'_>,
    others: &[PredictedAgent<'_>],
    alpha: RiskFactor,
    cfg: &RiskConfig,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    let mut totals = vec![0.0; others.len()];
    if others.is_empty() {
        return Ok(totals);
    }
    let params = &cfg.uncertainty;
    for s in cfg.time_grid() {
        let w = cfg.survival.weight(s) * cfg.dt;
        let e = ego.footprint(s, alpha, params, Role::Ego)?;
        for (total, other) in totals.iter_mut().zip(others) {
            let o = other.footprint(s, alpha, params, Role::Other)?;
            *total += w * instantaneous_risk(&e, &o)?;
        }
    }
    Ok(totals)
}

/// Survival-discounted risk of the ego behavior against all other vehicles.
pub fn integrated_risk(
    ego: &PredictedAgent<'_>,
    others: &[PredictedAgent<'_>],
    alpha: RiskFactor,
    cfg: &RiskConfig,
) -> Result<f64> {
    Ok(integrated_risk_per_other(ego, others, alpha, cfg)?
        .iter()
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iso(var: f64) -> Matrix2<f64> {
        Matrix2::new(var, 0.0, 0.0, var)
    }

    #[test]
    fn risk_factor_clamps() {
        assert_eq!(RiskFactor::new(2.0).unwrap().value(), 1.0);
        assert_eq!(RiskFactor::new(-1.0).unwrap().value(), 0.04);
        assert!(RiskFactor::new(f64::NAN).is_err());
    }

    #[test]
    fn sigma_examples() {
        let p = UncertaintyParams::default();
        let cap = uncertainty_at(RiskFactor::DEFENSIVE, 10.0, 1e6, &p, 0.0).unwrap();
        assert!((cap[(0, 0)] - 100.0).abs() < 1e-12);
        for (alpha, v) in [(1.0, 0.0), (0.5, 30.0), (0.2, 3.0)] {
            let c = uncertainty_at(RiskFactor::new(alpha).unwrap(), v, 0.0, &p, 0.0).unwrap();
            assert!((c[(0, 0)] - 0.25).abs() < 1e-12);
        }
        let sigma = p.longitudinal_sigma(RiskFactor::CONFIDENT, 10.0, 5.0, Role::Ego);
        assert!((sigma - 0.4).abs() < 1e-12);
        assert!(uncertainty_at(RiskFactor::NORMAL, 1.0, -0.1, &p, 0.0).is_err());
    }

    #[test]
    fn covariance_rotates_with_heading() {
        let p = UncertaintyParams::default();
        let c = uncertainty_at(
            RiskFactor::DEFENSIVE,
            10.0,
            1e6,
            &p,
            std::f64::consts::FRAC_PI_2,
        )
        .unwrap();
        assert!((c[(1, 1)] - 100.0).abs() < 1e-9);
        assert!((c[(0, 0)] - 0.25).abs() < 1e-9);
        assert!(c[(0, 1)].abs() < 1e-9);
    }

    #[test]
    fn coincident_unit_gaussians() {
        let a = GaussianFootprint::new(Point::zeros(), iso(1.0));
        let r = instantaneous_risk(&a, &a).unwrap();
        assert!((r - 1.0 / (4.0 * PI)).abs() < 1e-15);
    }

    #[test]
    fn anisotropic_offset_closed_form() {
        let cov = Matrix2::new(4.0, 0.0, 0.0, 1.0);
        let a = GaussianFootprint::new(Point::zeros(), cov);
        let b = GaussianFootprint::new(Point::new(2.0, 0.0), cov);
        let expected = (-0.25f64).exp() / (8.0 * PI);
        assert!((instantaneous_risk(&a, &b).unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn singular_sum_is_reported() {
        let flat = Matrix2::new(1.0, 0.0, 0.0, 0.0);
        let a = GaussianFootprint::new(Point::zeros(), flat);
        assert!(matches!(
            instantaneous_risk(&a, &a),
            Err(Error::Degenerate { .. })
        ));
    }

    #[test]
    fn no_others_no_risk() {
        let path = PathGeometry::straight(Point::zeros(), Point::new(100.0, 0.0)).unwrap();
        let cv = AccelerationProfile::constant_velocity(10.0).unwrap();
        let ego = PredictedAgent::new(&path, VehicleState::new(0.0, 10.0), &cv);
        let r = integrated_risk(&ego, &[], RiskFactor::NORMAL, &RiskConfig::default()).unwrap();
        assert_eq!(r, 0.0);
    }

    #[test]
    fn quadrature_grid_counts() {
        assert_eq!(quadrature_steps(10.0, 0.1), 100);
        assert_eq!(quadrature_steps(1.0, 0.3), 4);
        assert_eq!(quadrature_steps(1.0, 1.0), 1);
    }
}
