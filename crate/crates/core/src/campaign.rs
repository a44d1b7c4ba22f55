//! Campaigns of independent simulation runs and the tables built from them.
//!
//! Runs are fanned out over a thread pool; results come back in input order
//! so every table is independent of scheduling.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::EngineConfig;
use crate::error::{Error, Result};
use crate::estimator::{summarize, summarize_values, EstimationSummary};
use crate::simulator::{run, DriverType, ScenarioSpec, SimulationTrace};
use crate::warning::{compare_records, ErrorReport, Outcome, SystemErrors};

/// One simulated run with its reductions.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub spec: ScenarioSpec,
    pub trace: SimulationTrace,
    pub summary: EstimationSummary,
    pub errors: ErrorReport,
}

impl RunResult {
    pub fn from_trace(spec: ScenarioSpec, trace: SimulationTrace) -> Result<Self> {
        let summary = summarize(&trace.estimation, spec.driver.alpha())?;
        let errors = compare_records(&trace.warnings)?;
        Ok(Self {
            spec,
            trace,
            summary,
            errors,
        })
    }
}

pub fn run_one(spec: &ScenarioSpec, cfg: &EngineConfig) -> Result<RunResult> {
    RunResult::from_trace(spec.clone(), run(spec, cfg)?)
}

/// Run every spec; the output is in the order of `specs`.
pub fn run_all(specs: &[ScenarioSpec], cfg: &EngineConfig) -> Result<Vec<RunResult>> {
    cfg.validate()?;
    specs.par_iter().map(|s| run_one(s, cfg)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub scenario: String,
    pub topology: String,
    pub variant: String,
    pub driver: String,
    pub ground_truth: f64,
    pub mean: f64,
    pub std: f64,
    pub difference: f64,
    pub samples: usize,
    pub interacting_samples: usize,
}

/// Estimation results of one driver type averaged over its runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypeRow {
    pub driver: String,
    pub ground_truth: f64,
    /// Mean of the per-run means.
    pub average: f64,
    pub difference: f64,
    /// Population standard deviation of the per-run means.
    pub standard_deviation: f64,
    /// Population standard deviation over all samples of all runs.
    pub pooled_std: f64,
    pub runs: usize,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WarningRow {
    pub scenario: String,
    pub driver: String,
    pub wants_warning: bool,
    pub personalized_run: Option<Outcome>,
    pub baseline_run: Option<Outcome>,
    pub error_reduction: i64,
    pub personalized: SystemErrors,
    pub baseline: SystemErrors,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CampaignReport {
    pub runs: Vec<RunRow>,
    pub types: Vec<TypeRow>,
    pub warnings: Vec<WarningRow>,
    /// Files written for this report, relative to its output directory.
    #[serde(default)]
    pub artifacts: Vec<String>,
}

impl CampaignReport {
    pub fn from_results(results: &[RunResult]) -> Result<Self> {
        if results.is_empty() {
            return Err(Error::Empty("campaign runs"));
        }
        let runs = results
            .iter()
            .map(|r| RunRow {
                scenario: r.spec.name.clone(),
                topology: r.spec.topology.clone(),
                variant: r.spec.variant.clone(),
                driver: r.spec.driver.label(),
                ground_truth: r.spec.driver.alpha().value(),
                mean: r.summary.mean,
                std: r.summary.std,
                difference: r.summary.diff_to_ground_truth,
                samples: r.summary.n_samples,
                interacting_samples: r.trace.estimation.iter().filter(|s| s.interacting).count(),
            })
            .collect();

        let mut drivers: Vec<DriverType> = Vec::new();
        for r in results {
            if !drivers.iter().any(|d| d.label() == r.spec.driver.label()) {
                drivers.push(r.spec.driver);
            }
        }
        let types = drivers
            .into_iter()
            .map(|driver| type_row(driver, results))
            .collect::<Result<_>>()?;

        let warnings = results
            .iter()
            .map(|r| WarningRow {
                scenario: r.spec.name.clone(),
                driver: r.spec.driver.label(),
                wants_warning: r.spec.driver_wants_warning,
                personalized_run: r.errors.personalized.run_outcome,
                baseline_run: r.errors.baseline.run_outcome,
                error_reduction: r.errors.error_reduction(),
                personalized: r.errors.personalized,
                baseline: r.errors.baseline,
            })
            .collect();

        Ok(Self {
            runs,
            types,
            warnings,
            artifacts: Vec::new(),
        })
    }

    pub fn type_row(&self, driver: DriverType) -> Option<&TypeRow> {
        let label = driver.label();
        self.types.iter().find(|t| t.driver == label)
    }

    /// Per-type table with columns driver, ground truth, average, difference,
    /// standard deviation.
    pub fn types_csv(&self) -> String {
        let mut out = String::from(
            "driver,ground_truth,average,difference,standard_deviation,pooled_std,runs,samples\n",
        );
        for t in &self.types {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                t.driver,
                t.ground_truth,
                t.average,
                t.difference,
                t.standard_deviation,
                t.pooled_std,
                t.runs,
                t.samples
            );
        }
        out
    }

    pub fn runs_csv(&self) -> String {
        let mut out = String::from(
            "scenario,topology,variant,driver,ground_truth,mean,std,difference,samples,interacting_samples\n",
        );
        for r in &self.runs {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                r.scenario,
                r.topology,
                r.variant,
                r.driver,
                r.ground_truth,
                r.mean,
                r.std,
                r.difference,
                r.samples,
                r.interacting_samples
            );
        }
        out
    }

    pub fn warnings_csv(&self) -> String {
        let mut out = String::from(
            "scenario,driver,wants_warning,personalized_run,baseline_run,error_reduction,\
personalized_first_warning,baseline_first_warning,personalized_max,baseline_max\n",
        );
        let opt = |t: Option<f64>| t.map(|t| t.to_string()).unwrap_or_default();
        let outcome = |o: Option<Outcome>| o.map(|o| o.to_string()).unwrap_or_default();
        for w in &self.warnings {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{:e},{:e}",
                w.scenario,
                w.driver,
                w.wants_warning,
                outcome(w.personalized_run),
                outcome(w.baseline_run),
                w.error_reduction,
                opt(w.personalized.first_warning_time),
                opt(w.baseline.first_warning_time),
                w.personalized.max_signal,
                w.baseline.max_signal
            );
        }
        out
    }

    /// Human-readable per-type table.
    pub fn types_table(&self) -> String {
        let mut out = format!(
            "{:<12} {:>12} {:>8} {:>10} {:>9} {:>5}\n",
            "driver", "ground truth", "average", "difference", "std dev", "runs"
        );
        for t in &self.types {
            let _ = writeln!(
                out,
                "{:<12} {:>12.2} {:>8.3} {:>10.3} {:>9.3} {:>5}",
                t.driver, t.ground_truth, t.average, t.difference, t.standard_deviation, t.runs
            );
        }
        out
    }

    pub fn warnings_table(&self) -> String {
        let mut out = format!(
            "{:<34} {:>6} {:>12} {:>9} {:>10}\n",
            "scenario", "wants", "personalized", "baseline", "reduction"
        );
        let outcome = |o: Option<Outcome>| o.map(|o| o.to_string()).unwrap_or_else(|| "-".into());
        for w in &self.warnings {
            let _ = writeln!(
                out,
                "{:<34} {:>6} {:>12} {:>9} {:>10}",
                w.scenario,
                w.wants_warning,
                outcome(w.personalized_run),
                outcome(w.baseline_run),
                w.error_reduction
            );
        }
        out
    }
}

fn type_row(driver: DriverType, results: &[RunResult]) -> Result<TypeRow> {
    let label = driver.label();
    let mine: Vec<&RunResult> = results
        .iter()
        .filter(|r| r.spec.driver.label() == label)
        .collect();
    let gt = driver.alpha();
    let across = summarize_values(mine.iter().map(|r| r.summary.mean), gt)?;
    let pooled = summarize_values(
        mine.iter()
            .flat_map(|r| r.trace.estimation.iter().map(|s| s.alpha_hat.value())),
        gt,
    )?;
    Ok(TypeRow {
        driver: label,
        ground_truth: gt.value(),
        average: across.mean,
        difference: across.diff_to_ground_truth,
        standard_deviation: across.std,
        pooled_std: pooled.std,
        runs: mine.len(),
        samples: pooled.n_samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimator::EstimationSample;
    use crate::risk::RiskFactor;
    use crate::scenarios;
    use crate::warning::WarningRecord;

    fn fake(driver: DriverType, alphas: &[f64]) -> RunResult {
        let spec = scenarios::builtin_for(driver).remove(0);
        let estimation: Vec<EstimationSample> = alphas
            .iter()
            .enumerate()
            .map(|(i, &a)| EstimationSample {
                timestamp: i as f64 * 0.1,
                a_def: -1.0,
                a_conf: 1.0,
                a_driver: 0.0,
                alpha_hat: RiskFactor::new(a).unwrap(),
                interacting: true,
            })
            .collect();
        let warnings = estimation
            .iter()
            .map(|s| WarningRecord::new(s.timestamp, (0.0, false), (0.0, false), false))
            .collect();
        let trace = SimulationTrace {
            scenario: spec.name.clone(),
            driver,
            warning_alpha: driver.alpha(),
            snapshots: Vec::new(),
            ego_accelerations: vec![0.0; alphas.len()],
            estimation,
            warnings,
        };
        RunResult::from_trace(spec, trace).unwrap()
    }

    #[test]
    fn type_rows_average_run_means() {
        let results = [
            fake(DriverType::Defensive, &[1.0, 1.0]),
            fake(DriverType::Defensive, &[0.8, 0.8, 0.8, 0.8]),
            fake(DriverType::Confident, &[0.04]),
        ];
        let report = CampaignReport::from_results(&results).unwrap();
        assert_eq!(report.types.len(), 2);
        let def = report.type_row(DriverType::Defensive).unwrap();
        assert!((def.average - 0.9).abs() < 1e-12);
        assert!((def.standard_deviation - 0.1).abs() < 1e-12);
        assert!((def.difference - 0.1).abs() < 1e-12);
        assert_eq!((def.runs, def.samples), (2, 6));
        // pooled over six samples: mean 0.8667
        let m = (2.0 + 3.2) / 6.0;
        let pooled = ((2.0 * (1.0f64 - m).powi(2) + 4.0 * (0.8f64 - m).powi(2)) / 6.0).sqrt();
        assert!((def.pooled_std - pooled).abs() < 1e-12);
        assert!(report.type_row(DriverType::Normal).is_none());
        assert_eq!(report.types_csv().lines().count(), 3);
    }

    #[test]
    fn empty_campaign_is_an_error() {
        assert!(matches!(
            CampaignReport::from_results(&[]),
            Err(Error::Empty(_))
        ));
    }
}
