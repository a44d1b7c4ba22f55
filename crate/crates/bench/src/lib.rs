//! Fixtures shared by the benchmarks.

use riskwarn::risk::Role;
use riskwarn::scenarios::{find_builtin, planner_fixture};
use riskwarn::{GaussianFootprint, Point, RiskFactor, ScenarioSpec, Scene, UncertaintyParams};

/// Car-following scene with a lead vehicle close enough to matter.
pub fn following_scene() -> Scene {
    planner_fixture().initial_scene().expect("fixture is valid")
}

/// Initial scene of the two-lane crossing.
pub fn intersection_scene() -> Scene {
    scenario("intersection-high-normal")
        .initial_scene()
        .expect("fixture is valid")
}

pub fn scenario(name: &str) -> ScenarioSpec {
    find_builtin(name, None).expect("built-in scenario")
}

/// Ego and a crossing vehicle two seconds into a prediction.
pub fn footprint_pair() -> (GaussianFootprint, GaussianFootprint) {
    let p = UncertaintyParams::default();
    let ego = p.covariance(RiskFactor::NORMAL, 12.0, 2.0, 0.0, Role::Ego);
    let other = p.covariance(RiskFactor::NORMAL, 9.0, 2.0, 1.2, Role::Other);
    (
        GaussianFootprint::new(Point::new(0.0, 0.0), ego),
        GaussianFootprint::new(Point::new(1.5, 0.4), other),
    )
}
