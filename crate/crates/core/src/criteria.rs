//! Self-checks of the frozen calibration.
//!
//! Each check evaluates one acceptance criterion against the library and
//! returns a [`Verdict`]. [`reproduce`] runs the built-in campaign once and
//! evaluates all of them; the CLI `reproduce` command is a thin wrapper.

use std::f64::consts::PI;

use nalgebra::Matrix2;
use serde::{Deserialize, Serialize};

use crate::campaign::{run_all, CampaignReport, RunResult};
use crate::config::EngineConfig;
use crate::error::Result;
use crate::estimator::{interpolate_linear, interpolate_sigmoid, Interpolated};
use crate::planner::{plan, render_risk_map};
use crate::risk::{instantaneous_risk, GaussianFootprint, RiskFactor};
use crate::scenarios::{builtin_scenarios, planner_fixture};
use crate::scene::{predict_state, AccelerationProfile, Phase, Point, VehicleState};
use crate::simulator::{run, DriverType};
use crate::warning::{classify, Outcome};

/// Relative tolerance of the overlap check.
pub const OVERLAP_TOLERANCE: f64 = 0.02;
pub const OVERLAP_PAIRS: usize = 20;
pub const INTERPOLATION_TOLERANCE: f64 = 1e-12;
/// Density above which a risk-map cell counts as part of the risk spot.
pub const SPOT_THRESHOLD: f64 = 1e-3;

pub const DEFENSIVE_BAND: (f64, f64) = (0.85, 1.0);
pub const NORMAL_BAND: (f64, f64) = (0.38, 0.62);
pub const CONFIDENT_BAND: (f64, f64) = (0.04, 0.25);
pub const MAX_TYPE_STD: f64 = 0.15;
pub const FIRST_WARNING_WINDOW: (f64, f64) = (2.0, 4.0);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub id: u8,
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Verdict {
    fn new(id: u8, name: &str, failures: Vec<String>, summary: String) -> Self {
        let passed = failures.is_empty();
        Self {
            id,
            name: name.into(),
            passed,
            detail: if passed { summary } else { failures.join("; ") },
        }
    }
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let mark = if self.passed { "PASS" } else { "FAIL" };
        write!(
            f,
            "criterion {} {mark} {}: {}",
            self.id, self.name, self.detail
        )
    }
}

/// Overlap density by tensor-product trapezoid quadrature of the product of
/// the two densities. The grid covers ±9 standard deviations of the
/// narrower footprint with a spacing of a quarter of the smallest standard
/// deviation of either.
pub fn overlap_by_quadrature(a: &GaussianFootprint, b: &GaussianFootprint) -> f64 {
    let (narrow, _) = if a.covariance.determinant() <= b.covariance.determinant() {
        (a, b)
    } else {
        (b, a)
    };
    let smallest = |c: &Matrix2<f64>| c.symmetric_eigen().eigenvalues.min().sqrt();
    let h = smallest(&a.covariance).min(smallest(&b.covariance)) / 4.0;
    let half_x = 9.0 * narrow.covariance[(0, 0)].sqrt();
    let half_y = 9.0 * narrow.covariance[(1, 1)].sqrt();
    let nx = (2.0 * half_x / h).ceil() as usize;
    let ny = (2.0 * half_y / h).ceil() as usize;
    let (hx, hy) = (2.0 * half_x / nx as f64, 2.0 * half_y / ny as f64);
    let density = |g: &GaussianFootprint| {
        let inv = g.covariance.try_inverse().expect("SPD covariance");
        let norm = 1.0 / (2.0 * PI * g.covariance.determinant().sqrt());
        (inv, norm)
    };
    let (ia, na) = density(a);
    let (ib, nb) = density(b);
    let quad = |inv: &Matrix2<f64>, dx: f64, dy: f64| {
        inv[(0, 0)] * dx * dx + 2.0 * inv[(0, 1)] * dx * dy + inv[(1, 1)] * dy * dy
    };
    let mut sum = 0.0;
    for i in 0..=nx {
        let x = narrow.mean.x - half_x + i as f64 * hx;
        let wx = if i == 0 || i == nx { 0.5 } else { 1.0 };
        for j in 0..=ny {
            let y = narrow.mean.y - half_y + j as f64 * hy;
            let wy = if j == 0 || j == ny { 0.5 } else { 1.0 };
            let ea = quad(&ia, x - a.mean.x, y - a.mean.y);
            let eb = quad(&ib, x - b.mean.x, y - b.mean.y);
            sum += wx * wy * (-0.5 * (ea + eb)).exp();
        }
    }
    sum * hx * hy * na * nb
}

/// A deterministic family of covariance pairs and offsets: standard
/// deviations between 0.4 and 3 m, arbitrary orientation, offsets within
/// about two standard deviations.
pub fn overlap_fixtures(count: usize) -> Vec<(GaussianFootprint, GaussianFootprint)> {
    let frac = |k: usize, step: f64| (k as f64 * step).fract();
    let cov = |s1: f64, s2: f64, theta: f64| {
        let (c, s) = (theta.cos(), theta.sin());
        let r = Matrix2::new(c, -s, s, c);
        r * Matrix2::new(s1 * s1, 0.0, 0.0, s2 * s2) * r.transpose()
    };
    (1..=count)
        .map(|k| {
            let sd = |step| 0.4 + 2.6 * frac(k, step);
            let a = cov(
                sd(0.618_033_988_7),
                sd(0.414_213_562_4),
                PI * frac(k, 0.732_050_807_6),
            );
            let b = cov(
                sd(0.236_067_977_5),
                sd(0.645_751_311_1),
                PI * frac(k, 0.162_277_660_2),
            );
            let r = 2.0 * frac(k, 0.316_624_790_4);
            let phi = 2.0 * PI * frac(k, 0.123_105_625_6);
            let offset = Point::new(r * phi.cos(), r * phi.sin());
            let origin = Point::new(3.0 * k as f64, -1.0);
            (
                GaussianFootprint::new(origin, a),
                GaussianFootprint::new(origin + offset, b),
            )
        })
        .collect()
}

pub fn check_overlap() -> Result<Verdict> {
    let mut worst: f64 = 0.0;
    let mut failures = Vec::new();
    for (k, (a, b)) in overlap_fixtures(OVERLAP_PAIRS).iter().enumerate() {
        let closed = instantaneous_risk(a, b)?;
        let oracle = overlap_by_quadrature(a, b);
        let rel = (closed - oracle).abs() / oracle;
        worst = worst.max(rel);
        if !(rel <= OVERLAP_TOLERANCE) {
            failures.push(format!("pair {k}: {closed:e} vs quadrature {oracle:e}"));
        }
    }
    Ok(Verdict::new(
        1,
        "overlap density matches quadrature",
        failures,
        format!("{OVERLAP_PAIRS} pairs, max relative error {worst:.2e}"),
    ))
}

pub fn check_interpolation() -> Verdict {
    let eps = 0.05;
    let (a_def, a_conf) = (-2.0, 1.0);
    let value = |i: Interpolated| match i {
        Interpolated::Determined(a) => a.value(),
        Interpolated::Undetermined => f64::NAN,
    };
    let linear = |a| value(interpolate_linear(a, a_def, a_conf, eps));
    let cases = [
        ("defensive endpoint", linear(a_def), 1.0),
        ("confident endpoint", linear(a_conf), 0.04),
        ("midpoint", linear(-0.5), 0.52),
        ("clamp above", linear(-5.0), 1.0),
        ("clamp below", linear(3.0), 0.04),
    ];
    let mut failures: Vec<String> = cases
        .iter()
        .filter(|(_, got, want)| !((got - want).abs() <= INTERPOLATION_TOLERANCE))
        .map(|(name, got, want)| format!("{name}: {got} != {want}"))
        .collect();
    for u in [0.0, 0.5, 1.0] {
        let a = a_conf + u * (a_def - a_conf);
        let sig = value(interpolate_sigmoid(a, a_def, a_conf, 6.0, eps));
        if !((sig - linear(a)).abs() <= INTERPOLATION_TOLERANCE) {
            failures.push(format!("sigmoid at u = {u}: {sig} != {}", linear(a)));
        }
    }
    Verdict::new(
        2,
        "interpolation reproduces hand values",
        failures,
        "endpoints, midpoint 0.52, clamps, sigmoid anchors".into(),
    )
}

pub fn check_estimation(report: &CampaignReport) -> Verdict {
    let mut failures = Vec::new();
    let mut means = Vec::new();
    for (driver, (lo, hi)) in [
        (DriverType::Defensive, DEFENSIVE_BAND),
        (DriverType::Normal, NORMAL_BAND),
        (DriverType::Confident, CONFIDENT_BAND),
    ] {
        match report.type_row(driver) {
            Some(row) => {
                if !(lo..=hi).contains(&row.average) {
                    failures.push(format!(
                        "{} mean {:.3} outside [{lo}, {hi}]",
                        row.driver, row.average
                    ));
                }
                if !(row.standard_deviation <= MAX_TYPE_STD) {
                    failures.push(format!(
                        "{} std {:.3} > {MAX_TYPE_STD}",
                        row.driver, row.standard_deviation
                    ));
                }
                means.push(row.average);
            }
            None => failures.push(format!("no runs for {driver}")),
        }
    }
    if means.len() == 3 && !(means[0] > means[1] && means[1] > means[2]) {
        failures.push(format!("means not strictly ordered: {means:.3?}"));
    }
    let summary = report
        .types
        .iter()
        .map(|t| {
            format!(
                "{} {:.3} (std {:.3})",
                t.driver, t.average, t.standard_deviation
            )
        })
        .collect::<Vec<_>>()
        .join(", ");
    Verdict::new(3, "per-type estimates within bands", failures, summary)
}

fn find<'a>(
    results: &'a [RunResult],
    name: &str,
    failures: &mut Vec<String>,
) -> Option<&'a RunResult> {
    let found = results.iter().find(|r| r.spec.name == name);
    if found.is_none() {
        failures.push(format!("missing run {name}"));
    }
    found
}

pub fn check_warnings(results: &[RunResult]) -> Verdict {
    let mut failures = Vec::new();
    let mut first = None;
    for name in ["following-high-defensive", "intersection-high-defensive"] {
        if let Some(r) = find(results, name, &mut failures) {
            let (p, b) = (&r.errors.personalized, &r.errors.baseline);
            if b.warned_at_least_once {
                failures.push(format!("{name}: baseline warned (max {:e})", b.max_signal));
            }
            if !p.warned_at_least_once {
                failures.push(format!(
                    "{name}: personalized never warned (max {:e})",
                    p.max_signal
                ));
            }
            if name.starts_with("following") {
                first = p.first_warning_time;
                let (lo, hi) = FIRST_WARNING_WINDOW;
                match p.first_warning_time {
                    Some(t) if (lo..=hi).contains(&t) => {}
                    other => failures.push(format!(
                        "{name}: first warning {other:?} outside [{lo}, {hi}] s"
                    )),
                }
            }
        }
    }
    for name in [
        "following-medium-confident",
        "intersection-medium-confident",
    ] {
        if let Some(r) = find(results, name, &mut failures) {
            let (p, b) = (&r.errors.personalized, &r.errors.baseline);
            if !b.warned_at_least_once {
                failures.push(format!(
                    "{name}: baseline never warned (max {:e})",
                    b.max_signal
                ));
            }
            if p.warned_at_least_once {
                failures.push(format!(
                    "{name}: personalized warned (max {:e})",
                    p.max_signal
                ));
            }
        }
    }
    Verdict::new(
        4,
        "personalization removes warning errors",
        failures,
        format!(
            "defensive high-risk: baseline silent, personalized warns (following first at {:.1} s); confident medium-risk: baseline warns, personalized silent",
            first.unwrap_or(f64::NAN)
        ),
    )
}

pub fn check_parity(results: &[RunResult]) -> Verdict {
    let mut failures = Vec::new();
    let normal: Vec<&RunResult> = results
        .iter()
        .filter(|r| r.spec.driver == DriverType::Normal)
        .collect();
    if normal.is_empty() {
        failures.push("no normal-driver runs".into());
    }
    for r in &normal {
        let diff = r
            .trace
            .warnings
            .iter()
            .map(|w| (w.personalized_signal - w.baseline_signal).abs())
            .fold(0.0, f64::max);
        if diff != 0.0 {
            failures.push(format!("{}: signals differ by {diff:e}", r.spec.name));
        }
        if r.spec.variant == "medium"
            && (r.errors.personalized.warned_at_least_once
                || r.errors.baseline.warned_at_least_once)
        {
            failures.push(format!("{}: a system warned", r.spec.name));
        }
    }
    Verdict::new(
        5,
        "normal driver gets baseline behavior",
        failures,
        format!(
            "{} runs with identical signals, medium-risk runs silent",
            normal.len()
        ),
    )
}

pub fn check_planner_split(cfg: &EngineConfig) -> Result<Verdict> {
    let scene = planner_fixture().initial_scene()?;
    let firsts = [
        RiskFactor::CONFIDENT,
        RiskFactor::NORMAL,
        RiskFactor::DEFENSIVE,
    ]
    .iter()
    .map(|&a| Ok(plan(&scene, a, &cfg.risk, &cfg.planner)?.first_step_acceleration))
    .collect::<Result<Vec<f64>>>()?;
    let mut failures = Vec::new();
    if !(firsts[2] < 0.0) {
        failures.push(format!("defensive plan does not brake ({})", firsts[2]));
    }
    if !(firsts[0] > 0.0) {
        failures.push(format!(
            "confident plan does not accelerate ({})",
            firsts[0]
        ));
    }
    if !(firsts[0] >= firsts[1] && firsts[1] >= firsts[2]) {
        failures.push(format!("first accelerations not monotone: {firsts:?}"));
    }
    Ok(Verdict::new(
        6,
        "defensive plan brakes, confident plan accelerates",
        failures,
        format!(
            "first step at alpha 0.04 / 0.5 / 1: {} / {} / {} m/s²",
            firsts[0], firsts[1], firsts[2]
        ),
    ))
}

pub fn check_fallback(results: &[RunResult]) -> Verdict {
    let mut failures = Vec::new();
    let mut checked = 0;
    for r in results {
        let Some(end) = r.spec.interaction_ends_at else {
            continue;
        };
        for s in r
            .trace
            .estimation
            .iter()
            .filter(|s| s.timestamp > end + 1e-9)
        {
            checked += 1;
            if s.interacting || s.alpha_hat != RiskFactor::NORMAL {
                failures.push(format!(
                    "{} at t = {}: interacting {}, alpha {}",
                    r.spec.name,
                    s.timestamp,
                    s.interacting,
                    s.alpha_hat.value()
                ));
            }
        }
    }
    if checked == 0 {
        failures.push("no post-interaction samples".into());
    }
    failures.truncate(5);
    Verdict::new(
        7,
        "estimate falls back to 0.5 after the interaction",
        failures,
        format!("{checked} post-interaction samples"),
    )
}

/// Deterministic spot checks of the property suites.
pub fn check_properties(cfg: &EngineConfig, results: &[RunResult]) -> Result<Verdict> {
    let mut failures = Vec::new();

    let cov = Matrix2::new(4.0, 0.5, 0.5, 1.0);
    let at = |x: f64| GaussianFootprint::new(Point::new(x, 0.3 * x), cov);
    let risks = (0..20)
        .map(|k| instantaneous_risk(&at(0.0), &at(0.5 * k as f64)))
        .collect::<Result<Vec<f64>>>()?;
    if risks.windows(2).any(|w| w[1] > w[0]) {
        failures.push("risk increases with distance".into());
    }

    let scene = planner_fixture().initial_scene()?;
    let spots = [
        RiskFactor::CONFIDENT,
        RiskFactor::NORMAL,
        RiskFactor::DEFENSIVE,
    ]
    .iter()
    .map(|&a| Ok(render_risk_map(&scene, a, &cfg.risk, &cfg.planner)?.cells_above(SPOT_THRESHOLD)))
    .collect::<Result<Vec<usize>>>()?;
    if spots.windows(2).any(|w| w[1] < w[0]) {
        failures.push(format!("risk spot shrinks with alpha: {spots:?}"));
    }

    let result = plan(&scene, RiskFactor::NORMAL, &cfg.risk, &cfg.planner)?;
    if result
        .all_candidates
        .iter()
        .any(|c| c.cost.total < result.best_cost.total)
    {
        failures.push("plan is not the argmin".into());
    }

    let state = VehicleState::new(3.0, 12.0);
    let profile = AccelerationProfile::new(
        vec![
            Phase {
                acceleration: -2.5,
                duration: 3.0,
            },
            Phase {
                acceleration: 1.0,
                duration: 2.0,
            },
        ],
        10.0,
    )?;
    for (s1, s2) in [(1.0, 2.5), (2.9, 4.0), (4.5, 5.0)] {
        let direct = predict_state(&state, &profile, s1 + s2)?;
        let mid = predict_state(&state, &profile, s1)?;
        let split = predict_state(&mid, &profile.shifted(s1)?, s2)?;
        if (direct.path_position - split.path_position).abs() > 1e-9
            || (direct.velocity - split.velocity).abs() > 1e-9
        {
            failures.push(format!("prediction split at {s1} + {s2} disagrees"));
        }
    }

    let table = [
        (true, true, Outcome::TP),
        (false, false, Outcome::TN),
        (false, true, Outcome::FN),
        (true, false, Outcome::FP),
    ];
    if table.iter().any(|&(w, want, o)| classify(w, want) != o) {
        failures.push("classification truth table".into());
    }

    match results.first() {
        Some(r) => {
            if run(&r.spec, cfg)? != r.trace {
                failures.push(format!("rerun of {} differs", r.spec.name));
            }
        }
        None => failures.push("no run to repeat".into()),
    }

    Ok(Verdict::new(
        8,
        "property spot checks",
        failures,
        format!("distance monotonicity, spot areas {spots:?}, argmin, prediction split, truth table, determinism"),
    ))
}

/// Outcome of a full reproduction.
#[derive(Debug, Clone)]
pub struct Reproduction {
    pub results: Vec<RunResult>,
    pub report: CampaignReport,
    pub verdicts: Vec<Verdict>,
}

impl Reproduction {
    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.passed)
    }

    pub fn failed(&self) -> impl Iterator<Item = &Verdict> {
        self.verdicts.iter().filter(|v| !v.passed)
    }
}

pub fn reproduce(cfg: &EngineConfig) -> Result<Reproduction> {
    let results = run_all(&builtin_scenarios(), cfg)?;
    let report = CampaignReport::from_results(&results)?;
    let verdicts = vec![
        check_overlap()?,
        check_interpolation(),
        check_estimation(&report),
        check_warnings(&results),
        check_parity(&results),
        check_planner_split(cfg)?,
        check_fallback(&results),
        check_properties(cfg, &results)?,
    ];
    Ok(Reproduction {
        results,
        report,
        verdicts,
    })
}
