//! Built-in scenario catalog.
//!
//! Two layouts are provided. `following`: ego and a lead car on one straight
//! lane, the lead car brakes. `intersection`: ego crosses two perpendicular
//! lanes, each carrying one car approaching the crossing at the same time.
//! Each layout comes in a high-risk and a medium-risk variant and is driven
//! by each of the three anchor driver types.

use crate::error::{Error, Result};
use crate::scene::{PathGeometry, Point};
use crate::simulator::{DriverType, EgoSpec, OtherSpec, ScenarioSpec, ScriptEntry};

/// Parameters of the car-following layout.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FollowingParams {
    pub ego_velocity: f64,
    pub desired_velocity: f64,
    /// Bumper-to-bumper distance to the lead car at t = 0 (m).
    pub initial_gap: f64,
    pub lead_velocity: f64,
    pub brake_start: f64,
    pub brake_end: f64,
    pub brake_deceleration: f64,
    pub duration: f64,
}

/// Parameters of the intersection layout.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntersectionParams {
    pub ego_velocity: f64,
    pub desired_velocity: f64,
    /// Distance of the ego's center to the first conflict point at t = 0 (m).
    pub ego_distance: f64,
    pub cross_velocity: f64,
    /// Distances of the two crossing cars to their conflict points (m).
    pub cross_distances: [f64; 2],
    pub interaction_ends_at: f64,
    pub duration: f64,
}

pub const STEP: f64 = 0.1;
const LENGTH: f64 = 4.5;
const WIDTH: f64 = 1.8;
/// Lateral offset of each crossing lane from the crossing center (m).
const LANE_OFFSET: f64 = 1.75;

pub const FOLLOWING_HIGH: FollowingParams = FollowingParams {
    ego_velocity: 15.0,
    desired_velocity: 20.0,
    initial_gap: 40.0,
    lead_velocity: 15.0,
    brake_start: 1.5,
    brake_end: 3.5,
    brake_deceleration: 2.0,
    duration: 10.0,
};

pub const FOLLOWING_MEDIUM: FollowingParams = FollowingParams {
    ego_velocity: 15.0,
    desired_velocity: 18.0,
    initial_gap: 50.0,
    lead_velocity: 15.0,
    brake_start: 1.5,
    brake_end: 3.5,
    brake_deceleration: 1.0,
    duration: 10.0,
};

pub const INTERSECTION_HIGH: IntersectionParams = IntersectionParams {
    ego_velocity: 10.0,
    desired_velocity: 14.0,
    ego_distance: 50.0,
    cross_velocity: 10.0,
    cross_distances: [52.5, 60.5],
    interaction_ends_at: 4.0,
    duration: 4.5,
};

pub const INTERSECTION_MEDIUM: IntersectionParams = IntersectionParams {
    ego_velocity: 8.0,
    desired_velocity: 12.0,
    ego_distance: 50.0,
    cross_velocity: 8.0,
    cross_distances: [45.0, 53.0],
    interaction_ends_at: 5.0,
    duration: 5.5,
};

/// Close car-following scene used to check the planner split: the lead car
/// drives at the ego's speed 20 m ahead.
pub fn planner_fixture() -> ScenarioSpec {
    let p = FollowingParams {
        initial_gap: 20.0,
        ..FOLLOWING_HIGH
    };
    following("planner-fixture", "high", &p, DriverType::Normal)
}

/// Declared label: does a driver of this type want a warning in `layout`?
/// Defensive drivers want one everywhere, confident drivers nowhere. For the
/// normal driver the label follows what the α = 0.5 baseline does, which
/// warns only in the high-risk following layout.
fn wants_warning(driver: DriverType, layout: &str) -> bool {
    match driver {
        DriverType::Defensive => true,
        DriverType::Normal => layout == "following-high",
        DriverType::Confident => false,
        DriverType::Custom(a) => a.value() > 0.5 && layout.ends_with("-high"),
    }
}

pub fn following(
    name: &str,
    variant: &str,
    p: &FollowingParams,
    driver: DriverType,
) -> ScenarioSpec {
    let lane = PathGeometry::straight(Point::new(-50.0, 0.0), Point::new(1000.0, 0.0))
        .expect("static lane");
    let ego_position = 50.0;
    ScenarioSpec {
        name: name.to_string(),
        topology: "following".into(),
        variant: variant.into(),
        driver,
        warning_alpha: None,
        driver_wants_warning: wants_warning(driver, &format!("following-{variant}")),
        duration: p.duration,
        step: STEP,
        interaction_ends_at: None,
        paths: vec![lane],
        ego: EgoSpec {
            path: 0,
            position: ego_position,
            velocity: p.ego_velocity,
            desired_velocity: p.desired_velocity,
            length: LENGTH,
            width: WIDTH,
        },
        others: vec![OtherSpec {
            path: 0,
            position: ego_position + p.initial_gap + LENGTH,
            velocity: p.lead_velocity,
            length: LENGTH,
            width: WIDTH,
            script: vec![ScriptEntry {
                t_start: p.brake_start,
                t_end: p.brake_end,
                acceleration: -p.brake_deceleration,
            }],
        }],
    }
}

pub fn intersection(
    name: &str,
    variant: &str,
    p: &IntersectionParams,
    driver: DriverType,
) -> ScenarioSpec {
    const REACH: f64 = 300.0;
    // ego drives east along y = 0; crossing lanes at x = ±LANE_OFFSET
    let ego_lane = PathGeometry::straight(Point::new(-REACH, 0.0), Point::new(REACH, 0.0))
        .expect("static lane");
    let northbound = PathGeometry::straight(
        Point::new(-LANE_OFFSET, -REACH),
        Point::new(-LANE_OFFSET, REACH),
    )
    .expect("static lane");
    let southbound = PathGeometry::straight(
        Point::new(LANE_OFFSET, REACH),
        Point::new(LANE_OFFSET, -REACH),
    )
    .expect("static lane");
    // first conflict point of the ego is the northbound lane at x = -LANE_OFFSET
    let ego_position = REACH - LANE_OFFSET - p.ego_distance;
    ScenarioSpec {
        name: name.to_string(),
        topology: "intersection".into(),
        variant: variant.into(),
        driver,
        warning_alpha: None,
        driver_wants_warning: wants_warning(driver, &format!("intersection-{variant}")),
        duration: p.duration,
        step: STEP,
        interaction_ends_at: Some(p.interaction_ends_at),
        paths: vec![ego_lane, northbound, southbound],
        ego: EgoSpec {
            path: 0,
            position: ego_position,
            velocity: p.ego_velocity,
            desired_velocity: p.desired_velocity,
            length: LENGTH,
            width: WIDTH,
        },
        others: vec![
            OtherSpec {
                path: 1,
                position: REACH - p.cross_distances[0],
                velocity: p.cross_velocity,
                length: LENGTH,
                width: WIDTH,
                script: vec![],
            },
            OtherSpec {
                path: 2,
                position: REACH - p.cross_distances[1],
                velocity: p.cross_velocity,
                length: LENGTH,
                width: WIDTH,
                script: vec![],
            },
        ],
    }
}

/// Layout names of the catalog; a scenario name is `<layout>-<driver>`.
pub const LAYOUTS: [&str; 4] = [
    "following-high",
    "following-medium",
    "intersection-high",
    "intersection-medium",
];

fn build(layout: &str, driver: DriverType) -> Option<ScenarioSpec> {
    let name = format!("{layout}-{}", driver.label());
    Some(match layout {
        "following-high" => following(&name, "high", &FOLLOWING_HIGH, driver),
        "following-medium" => following(&name, "medium", &FOLLOWING_MEDIUM, driver),
        "intersection-high" => intersection(&name, "high", &INTERSECTION_HIGH, driver),
        "intersection-medium" => intersection(&name, "medium", &INTERSECTION_MEDIUM, driver),
        _ => return None,
    })
}

/// Every layout of the catalog, driven by `driver`.
pub fn builtin_for(driver: DriverType) -> Vec<ScenarioSpec> {
    LAYOUTS
        .iter()
        .filter_map(|layout| build(layout, driver))
        .collect()
}

/// The full catalog: every layout for each anchor driver type.
pub fn builtin_scenarios() -> Vec<ScenarioSpec> {
    DriverType::ANCHORS
        .into_iter()
        .flat_map(builtin_for)
        .collect()
}

pub fn builtin_names() -> Vec<String> {
    builtin_scenarios().into_iter().map(|s| s.name).collect()
}

/// Look a built-in scenario up by name.
///
/// `name` is either a full name such as `following-high-defensive` or
/// `following-high-alpha=0.3`, or a bare layout name. A given `driver`
/// replaces the one in the name; a bare layout defaults to the normal driver.
pub fn find_builtin(name: &str, driver: Option<DriverType>) -> Result<ScenarioSpec> {
    for layout in LAYOUTS {
        let named = if name == layout {
            Some(DriverType::Normal)
        } else {
            name.strip_prefix(layout)
                .and_then(|rest| rest.strip_prefix('-'))
                .and_then(|d| d.parse().ok())
        };
        if let Some(d) = named {
            return Ok(build(layout, driver.unwrap_or(d)).expect("catalog layout"));
        }
    }
    let mut available: Vec<String> = LAYOUTS.iter().map(|l| l.to_string()).collect();
    available.extend(builtin_names());
    Err(Error::UnknownScenario {
        name: name.to_string(),
        available,
    })
}
