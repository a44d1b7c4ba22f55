//! Personalized driver risk warning.
//!
//! The crate models collision risk as the overlap of predicted Gaussian
//! vehicle positions whose spread depends on a personalized risk factor α,
//! plans driver behaviors with the Risk Maps cost `C = R − U + O`, estimates a
//! driver's α by bracketing the observed acceleration between a defensive and
//! a confident planner, and adapts a forward warning signal to the estimated
//! driver type. A deterministic closed-loop simulator and a campaign runner
//! reproduce the estimation and warning experiments.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod campaign;
pub mod config;
pub mod criteria;
pub mod error;
pub mod estimator;
pub mod export;
pub mod planner;
pub mod risk;
pub mod scenarios;
pub mod scene;
pub mod simulator;
pub mod warning;

pub use config::EngineConfig;
pub use error::{Error, Result};
pub use estimator::{EstimationSample, EstimationSummary, EstimatorConfig, Interpolation};
pub use planner::{CostBreakdown, PlanResult, PlannerConfig, RiskMapGrid};
pub use risk::{GaussianFootprint, RiskConfig, RiskFactor, SurvivalParams, UncertaintyParams};
pub use scene::{AccelerationProfile, PathGeometry, Phase, Point, Scene, Vehicle, VehicleState};
pub use simulator::{DriverType, ScenarioSpec, SimulationTrace};
pub use warning::{ErrorReport, Outcome, WarningConfig, WarningRecord, WeightFunction};
