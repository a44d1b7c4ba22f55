//! Personalized warning signal and error classification.
//!
//! The warning signal is the risk of keeping the current velocity, evaluated
//! with the driver's risk factor and scaled by a personalized weight:
//! `W(t) = w_α · R(α)`. The baseline system always uses α = 0.5 and weight 1.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::planner::{others_as_agents, predict_others, PlannerConfig};
use crate::risk::{integrated_risk, PredictedAgent, RiskConfig, RiskFactor};
use crate::scene::{AccelerationProfile, Scene};

/// Piecewise-linear map from risk factor to warning weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(f64, f64)>", into = "Vec<(f64, f64)>")]
pub struct WeightFunction {
    anchors: Vec<(f64, f64)>,
}

impl WeightFunction {
    pub fn new(anchors: Vec<(f64, f64)>) -> Result<Self> {
        if anchors.is_empty() {
            return Err(Error::Empty("weight anchors"));
        }
        if anchors
            .iter()
            .any(|(a, w)| !(a.is_finite() && w.is_finite() && *w >= 0.0))
        {
            return Err(Error::invalid(
                "weight function",
                "anchors must be finite, weights >= 0",
            ));
        }
        for pair in anchors.windows(2) {
            if !(pair[1].0 > pair[0].0 && pair[1].1 > pair[0].1) {
                return Err(Error::invalid(
                    "weight function",
                    "alphas and weights must be strictly increasing",
                ));
            }
        }
        Ok(Self { anchors })
    }

    pub fn anchors(&self) -> &[(f64, f64)] {
        &self.anchors
    }
}

impl Default for WeightFunction {
    fn default() -> Self {
        Self {
            anchors: vec![(0.04, 0.01), (0.5, 1.0), (1.0, 4.0)],
        }
    }
}

impl TryFrom<Vec<(f64, f64)>> for WeightFunction {
    type Error = Error;
    fn try_from(v: Vec<(f64, f64)>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<WeightFunction> for Vec<(f64, f64)> {
    fn from(w: WeightFunction) -> Self {
        w.anchors
    }
}

/// Weight for `alpha`, interpolated between anchors and clamped outside them.
pub fn weight_for(alpha: RiskFactor, wf: &WeightFunction) -> f64 {
    let a = alpha.value();
    let anchors = &wf.anchors;
    let (first, last) = (anchors[0], anchors[anchors.len() - 1]);
    if a <= first.0 {
        return first.1;
    }
    if a >= last.0 {
        return last.1;
    }
    let i = anchors.partition_point(|&(x, _)| x <= a);
    let (x0, y0) = anchors[i - 1];
    let (x1, y1) = anchors[i];
    if a == x0 {
        return y0;
    }
    y0 + (y1 - y0) * (a - x0) / (x1 - x0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WarningConfig {
    /// R_thr: a signal strictly above this triggers a warning.
    pub threshold: f64,
    #[serde(default)]
    pub weights: WeightFunction,
}

impl Default for WarningConfig {
    fn default() -> Self {
        Self {
            threshold: 1e-3,
            weights: WeightFunction::default(),
        }
    }
}

impl WarningConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.threshold.is_finite() && self.threshold > 0.0) {
            return Err(Error::invalid("warning config", "threshold must be > 0"));
        }
        Ok(())
    }
}

/// Risk of the constant-velocity behavior under `alpha`, unweighted.
pub fn constant_velocity_risk(
    scene: &Scene,
    alpha: RiskFactor,
    risk_cfg: &RiskConfig,
    planner_cfg: &PlannerConfig,
) -> Result<f64> {
    if scene.others.is_empty() {
        return Ok(0.0);
    }
    let cv = AccelerationProfile::constant_velocity(risk_cfg.horizon)?;
    let ego = PredictedAgent::new(scene.ego_path(), scene.ego.state, &cv);
    let predictions = predict_others(scene, planner_cfg.other_prediction, risk_cfg.horizon)?;
    let others = others_as_agents(scene, &predictions);
    integrated_risk(&ego, &others, alpha, risk_cfg)
}

/// `(W, W > threshold)` for a driver with risk factor `alpha`.
pub fn warning_signal(
    scene: &Scene,
    alpha: RiskFactor,
    risk_cfg: &RiskConfig,
    planner_cfg: &PlannerConfig,
    cfg: &WarningConfig,
) -> Result<(f64, bool)> {
    cfg.validate()?;
    let w = weight_for(alpha, &cfg.weights)
        * constant_velocity_risk(scene, alpha, risk_cfg, planner_cfg)?;
    Ok((w, w > cfg.threshold))
}

/// Signal of the non-personalized system: α = 0.5 with unit weight.
pub fn baseline_signal(
    scene: &Scene,
    risk_cfg: &RiskConfig,
    planner_cfg: &PlannerConfig,
    cfg: &WarningConfig,
) -> Result<(f64, bool)> {
    cfg.validate()?;
    let r = constant_velocity_risk(scene, RiskFactor::NORMAL, risk_cfg, planner_cfg)?;
    Ok((r, r > cfg.threshold))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Outcome {
    TP,
    TN,
    FN,
    FP,
}

impl Outcome {
    pub fn is_error(self) -> bool {
        matches!(self, Outcome::FN | Outcome::FP)
    }
}

impl std::fmt::Display for Outcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Outcome::TP => "TP",
            Outcome::TN => "TN",
            Outcome::FN => "FN",
            Outcome::FP => "FP",
        })
    }
}

pub fn classify(warned: bool, wants_warning: bool) -> Outcome {
    match (wants_warning, warned) {
        (true, true) => Outcome::TP,
        (true, false) => Outcome::FN,
        (false, true) => Outcome::FP,
        (false, false) => Outcome::TN,
    }
}

/// One system's output at one time step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignalSample {
    pub timestamp: f64,
    pub signal: f64,
    pub warn: bool,
    pub wants_warning: bool,
}

impl SignalSample {
    pub fn outcome(&self) -> Outcome {
        classify(self.warn, self.wants_warning)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WarningRecord {
    pub timestamp: f64,
    pub personalized_signal: f64,
    pub baseline_signal: f64,
    pub personalized_warn: bool,
    pub baseline_warn: bool,
    pub driver_wants_warning: bool,
    pub personalized_outcome: Outcome,
    pub baseline_outcome: Outcome,
}

impl WarningRecord {
    pub fn new(
        timestamp: f64,
        personalized: (f64, bool),
        baseline: (f64, bool),
        driver_wants_warning: bool,
    ) -> Self {
        Self {
            timestamp,
            personalized_signal: personalized.0,
            baseline_signal: baseline.0,
            personalized_warn: personalized.1,
            baseline_warn: baseline.1,
            driver_wants_warning,
            personalized_outcome: classify(personalized.1, driver_wants_warning),
            baseline_outcome: classify(baseline.1, driver_wants_warning),
        }
    }

    pub fn personalized(&self) -> SignalSample {
        SignalSample {
            timestamp: self.timestamp,
            signal: self.personalized_signal,
            warn: self.personalized_warn,
            wants_warning: self.driver_wants_warning,
        }
    }

    pub fn baseline(&self) -> SignalSample {
        SignalSample {
            timestamp: self.timestamp,
            signal: self.baseline_signal,
            warn: self.baseline_warn,
            wants_warning: self.driver_wants_warning,
        }
    }
}

/// Error counts of one system over one run.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SystemErrors {
    pub warned_at_least_once: bool,
    /// Outcome of the run taken as a whole.
    pub run_outcome: Option<Outcome>,
    pub first_warning_time: Option<f64>,
    pub max_signal: f64,
    pub step_tp: usize,
    pub step_tn: usize,
    pub step_fn: usize,
    pub step_fp: usize,
}

impl SystemErrors {
    fn from_stream(stream: &[SignalSample]) -> Self {
        let mut e = SystemErrors::default();
        for s in stream {
            match s.outcome() {
                Outcome::TP => e.step_tp += 1,
                Outcome::TN => e.step_tn += 1,
                Outcome::FN => e.step_fn += 1,
                Outcome::FP => e.step_fp += 1,
            }
            if s.warn && e.first_warning_time.is_none() {
                e.first_warning_time = Some(s.timestamp);
            }
            e.max_signal = e.max_signal.max(s.signal);
        }
        e.warned_at_least_once = e.first_warning_time.is_some();
        e.run_outcome = stream
            .first()
            .map(|s| classify(e.warned_at_least_once, s.wants_warning));
        e
    }

    pub fn run_false_negatives(&self) -> usize {
        usize::from(self.run_outcome == Some(Outcome::FN))
    }

    pub fn run_false_positives(&self) -> usize {
        usize::from(self.run_outcome == Some(Outcome::FP))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub personalized: SystemErrors,
    pub baseline: SystemErrors,
}

impl ErrorReport {
    /// Run-level errors removed by personalization (negative if added).
    pub fn error_reduction(&self) -> i64 {
        let count = |e: &SystemErrors| (e.run_false_negatives() + e.run_false_positives()) as i64;
        count(&self.baseline) - count(&self.personalized)
    }
}

/// Compare aligned personalized and baseline streams of one run.
pub fn compare_runs(
    personalized: &[SignalSample],
    baseline: &[SignalSample],
) -> Result<ErrorReport> {
    if personalized.len() != baseline.len() {
        return Err(Error::Misaligned(format!(
            "{} personalized vs {} baseline samples",
            personalized.len(),
            baseline.len()
        )));
    }
    for (i, (p, b)) in personalized.iter().zip(baseline).enumerate() {
        if p.timestamp != b.timestamp || p.wants_warning != b.wants_warning {
            return Err(Error::Misaligned(format!(
                "sample {i} differs in time or label"
            )));
        }
    }
    Ok(ErrorReport {
        personalized: SystemErrors::from_stream(personalized),
        baseline: SystemErrors::from_stream(baseline),
    })
}

/// [`compare_runs`] on the two halves of a record stream.
pub fn compare_records(records: &[WarningRecord]) -> Result<ErrorReport> {
    let p: Vec<_> = records.iter().map(WarningRecord::personalized).collect();
    let b: Vec<_> = records.iter().map(WarningRecord::baseline).collect();
    compare_runs(&p, &b)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn alpha(a: f64) -> RiskFactor {
        RiskFactor::new(a).unwrap()
    }

    #[test]
    fn weight_examples() {
        let wf = WeightFunction::default();
        assert_eq!(weight_for(alpha(0.5), &wf), 1.0);
        assert_eq!(weight_for(alpha(1.0), &wf), 4.0);
        assert_eq!(weight_for(alpha(0.04), &wf), 0.01);
        assert!((weight_for(alpha(0.75), &wf) - 2.5).abs() < 1e-12);
    }

    #[test]
    fn weight_function_validation() {
        assert!(WeightFunction::new(vec![(0.5, 1.0), (0.4, 2.0)]).is_err());
        assert!(WeightFunction::new(vec![(0.4, 1.0), (0.5, 1.0)]).is_err());
        assert!(WeightFunction::new(vec![]).is_err());
    }

    #[test]
    fn classify_truth_table() {
        for warned in [false, true] {
            for wants in [false, true] {
                let o = classify(warned, wants);
                assert_eq!(o == Outcome::FN, wants && !warned);
                assert_eq!(o == Outcome::FP, !wants && warned);
                assert_eq!(o == Outcome::TP, wants && warned);
                assert_eq!(o == Outcome::TN, !wants && !warned);
            }
        }
    }

    #[test]
    fn record_classification_examples() {
        let r = WarningRecord::new(0.0, (2e-3, true), (5e-4, false), true);
        assert_eq!(
            (r.personalized_outcome, r.baseline_outcome),
            (Outcome::TP, Outcome::FN)
        );
        let r = WarningRecord::new(0.0, (1e-5, false), (2e-3, true), false);
        assert_eq!(
            (r.personalized_outcome, r.baseline_outcome),
            (Outcome::TN, Outcome::FP)
        );
        let r = WarningRecord::new(0.0, (0.0, false), (0.0, false), false);
        assert_eq!(
            (r.personalized_outcome, r.baseline_outcome),
            (Outcome::TN, Outcome::TN)
        );
    }

    #[test]
    fn compare_detects_misalignment() {
        let a = [SignalSample {
            timestamp: 0.0,
            signal: 0.0,
            warn: false,
            wants_warning: false,
        }];
        let b = [SignalSample {
            timestamp: 0.1,
            ..a[0]
        }];
        assert!(matches!(compare_runs(&a, &[]), Err(Error::Misaligned(_))));
        assert!(matches!(compare_runs(&a, &b), Err(Error::Misaligned(_))));
    }

    #[test]
    fn run_level_outcomes() {
        let records: Vec<_> = (0..10)
            .map(|k| {
                let t = k as f64 * 0.1;
                let p = if k == 4 { (2e-3, true) } else { (1e-4, false) };
                WarningRecord::new(t, p, (5e-4, false), true)
            })
            .collect();
        let report = compare_records(&records).unwrap();
        assert_eq!(report.personalized.run_outcome, Some(Outcome::TP));
        assert_eq!(report.baseline.run_outcome, Some(Outcome::FN));
        assert_eq!(report.personalized.first_warning_time, Some(0.4));
        assert_eq!(report.baseline.step_fn, 10);
        assert_eq!(report.personalized.step_fn, 9);
        assert_eq!(report.error_reduction(), 1);
    }
}
