use std::path::Path;
use std::process::ExitCode;

use riskwarn::campaign::{run_all, run_one, CampaignReport, RunResult};
use riskwarn::criteria;
use riskwarn::export::{estimation_csv, trajectory_csv, warning_csv, Manifest, OutputDir};
use riskwarn::planner::{plan, render_risk_map};
use riskwarn::scenarios::{self, LAYOUTS};
use riskwarn::simulator::scene_at;
use riskwarn::warning::SystemErrors;
use riskwarn::{DriverType, EngineConfig, Result, RiskFactor, ScenarioSpec};

use crate::{load_config, GlobalArgs};

fn parse_drivers(arg: &str) -> Result<Vec<DriverType>> {
    if arg == "all" {
        Ok(DriverType::ANCHORS.to_vec())
    } else {
        Ok(vec![arg.parse()?])
    }
}

/// A scenario argument is a TOML file if it names an existing file or ends
/// in `.toml`, and a built-in name otherwise.
fn resolve(arg: &str, driver: Option<DriverType>) -> Result<ScenarioSpec> {
    let path = Path::new(arg);
    if !(arg.ends_with(".toml") || path.is_file()) {
        return scenarios::find_builtin(arg, driver);
    }
    let spec = ScenarioSpec::load(path)?;
    Ok(match driver {
        Some(d) if d != spec.driver => {
            let mut s = spec.with_driver(d);
            s.name = format!("{}-{}", spec.name, d.label());
            s
        }
        _ => spec,
    })
}

fn manifest(global: &GlobalArgs) -> Manifest {
    let command = std::env::args().skip(1).collect::<Vec<_>>().join(" ");
    let config = match &global.config {
        Some(p) => p.display().to_string(),
        None => "built-in defaults".into(),
    };
    Manifest::new(command, config)
}

fn finish(out: OutputDir, global: &GlobalArgs) -> Result<()> {
    let root = out.root().to_path_buf();
    let files = out.finish(manifest(global))?;
    println!("wrote {} files to {}", files.len(), root.display());
    Ok(())
}

/// Per-run CSVs, below `prefix` (which is empty or ends in `/`).
fn write_run(out: &mut OutputDir, prefix: &str, r: &RunResult) -> Result<()> {
    out.text(
        &format!("{prefix}estimation.csv"),
        &estimation_csv(&r.trace.estimation),
    )?;
    out.text(
        &format!("{prefix}warnings.csv"),
        &warning_csv(&r.trace.warnings),
    )?;
    let others: Vec<usize> = r.spec.others.iter().map(|o| o.path).collect();
    out.text(
        &format!("{prefix}trajectory.csv"),
        &trajectory_csv(&r.trace, r.spec.ego.path, &others),
    )?;
    Ok(())
}

fn write_report(out: &mut OutputDir, report: &mut CampaignReport) -> Result<()> {
    out.text("types.csv", &report.types_csv())?;
    out.text("runs.csv", &report.runs_csv())?;
    out.text("warnings.csv", &report.warnings_csv())?;
    report.artifacts = out.written().to_vec();
    report.artifacts.push("report.json".into());
    out.json("report.json", report)?;
    Ok(())
}

pub fn estimate(global: &GlobalArgs, scenario_args: &[String], driver: &str) -> Result<ExitCode> {
    let cfg = load_config(global)?;
    let drivers = parse_drivers(driver)?;
    let names: Vec<String> = if scenario_args.is_empty() {
        LAYOUTS.iter().map(|l| l.to_string()).collect()
    } else {
        scenario_args.to_vec()
    };
    let mut specs = Vec::new();
    for name in &names {
        for &d in &drivers {
            specs.push(resolve(name, Some(d))?);
        }
    }
    let results = run_all(&specs, &cfg)?;
    let mut report = CampaignReport::from_results(&results)?;

    let mut out = OutputDir::new(global.out.join("estimate"))?;
    for r in &results {
        out.text(
            &format!("runs/{}.csv", r.spec.name),
            &estimation_csv(&r.trace.estimation),
        )?;
    }
    write_report(&mut out, &mut report)?;
    print!("{}", report.types_table());
    finish(out, global)?;
    Ok(ExitCode::SUCCESS)
}

fn describe(name: &str, e: &SystemErrors) -> String {
    let outcome = e
        .run_outcome
        .map(|o| o.to_string())
        .unwrap_or_else(|| "-".into());
    let first = match e.first_warning_time {
        Some(t) => format!("first warning at {t:.1} s"),
        None => "never warned".into(),
    };
    format!(
        "{name:<13} {outcome:<3} {first:<24} max signal {:.3e}",
        e.max_signal
    )
}

pub fn warn(global: &GlobalArgs, scenario: &str, driver: Option<&str>) -> Result<ExitCode> {
    let cfg = load_config(global)?;
    let driver = driver.map(str::parse).transpose()?;
    let spec = resolve(scenario, driver)?;
    let r = run_one(&spec, &cfg)?;

    let mut out = OutputDir::new(global.out.join("warn").join(&spec.name))?;
    write_run(&mut out, "", &r)?;
    out.json("errors.json", &r.errors)?;

    println!(
        "{} driven by a {} driver (warning alpha {}), wants a warning: {}",
        spec.name,
        spec.driver,
        spec.warning_alpha().value(),
        if spec.driver_wants_warning {
            "yes"
        } else {
            "no"
        }
    );
    println!("{}", describe("personalized", &r.errors.personalized));
    println!("{}", describe("baseline", &r.errors.baseline));
    println!(
        "errors removed by personalization: {}",
        r.errors.error_reduction()
    );
    finish(out, global)?;
    Ok(ExitCode::SUCCESS)
}

pub fn riskmap(
    global: &GlobalArgs,
    scenario: &str,
    driver: Option<&str>,
    time: f64,
    alpha: Option<f64>,
) -> Result<ExitCode> {
    let cfg = load_config(global)?;
    let driver = driver.map(str::parse).transpose()?;
    let spec = resolve(scenario, driver)?;
    let alpha = match alpha {
        Some(a) => RiskFactor::new(a)?,
        None => spec.driver.alpha(),
    };
    let scene = scene_at(&spec, time, &cfg)?;
    let mut grid = render_risk_map(&scene, alpha, &cfg.risk, &cfg.planner)?;
    let chosen = plan(&scene, alpha, &cfg.risk, &cfg.planner)?;
    grid.add_profile_overlay("plan", &scene.ego.state, &chosen.best_profile)?;

    let dir = format!(
        "{}-t{}-alpha{}",
        spec.name,
        scene.timestamp(),
        alpha.value()
    );
    let mut out = OutputDir::new(global.out.join("riskmap").join(dir))?;
    out.text("riskmap.csv", &grid.to_csv())?;
    out.json("riskmap.json", &grid)?;

    let cells = grid.velocity_axis.len() * grid.time_axis.len();
    println!(
        "{} at t = {} s, alpha {}: {} of {cells} cells above {:e}, planned first acceleration {} m/s²",
        spec.name,
        scene.timestamp(),
        alpha.value(),
        grid.cells_above(criteria::SPOT_THRESHOLD),
        criteria::SPOT_THRESHOLD,
        chosen.first_step_acceleration
    );
    finish(out, global)?;
    Ok(ExitCode::SUCCESS)
}

pub fn reproduce(global: &GlobalArgs) -> Result<ExitCode> {
    let cfg = load_config(global)?;
    let mut rep = criteria::reproduce(&cfg)?;

    let mut out = OutputDir::new(global.out.join("reproduce"))?;
    out.text("engine.toml", &cfg.to_toml()?)?;
    for r in &rep.results {
        write_run(&mut out, &format!("runs/{}/", r.spec.name), r)?;
    }
    out.json("criteria.json", &rep.verdicts)?;
    write_report(&mut out, &mut rep.report)?;

    print!(
        "{}\n{}\n",
        rep.report.types_table(),
        rep.report.warnings_table()
    );
    for v in &rep.verdicts {
        println!("{v}");
    }
    finish(out, global)?;
    if rep.passed() {
        return Ok(ExitCode::SUCCESS);
    }
    let failed: Vec<String> = rep.failed().map(|v| v.id.to_string()).collect();
    eprintln!("failed criteria: {}", failed.join(", "));
    Ok(ExitCode::from(1))
}

pub fn scenarios(name: Option<&str>) -> Result<ExitCode> {
    match name {
        Some(name) => print!("{}", resolve(name, None)?.to_toml()?),
        None => {
            println!("layouts: {}", LAYOUTS.join(", "));
            for s in scenarios::builtin_scenarios() {
                println!("{}", s.name);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

pub fn config(global: &GlobalArgs) -> Result<ExitCode> {
    let cfg: EngineConfig = load_config(global)?;
    print!("{}", cfg.to_toml()?);
    Ok(ExitCode::SUCCESS)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn driver_lists() {
        assert_eq!(parse_drivers("all").unwrap().len(), 3);
        assert_eq!(parse_drivers("confident").unwrap(), [DriverType::Confident]);
        assert!(parse_drivers("everyone").is_err());
    }

    #[test]
    fn file_scenarios_are_renamed_when_retargeted() {
        let dir = tempfile::tempdir().unwrap();
        let path: std::path::PathBuf = dir.path().join("s.toml");
        let spec = scenarios::find_builtin("following-medium-normal", None).unwrap();
        std::fs::write(&path, spec.to_toml().unwrap()).unwrap();
        let arg = path.to_str().unwrap();
        assert_eq!(resolve(arg, None).unwrap(), spec);
        assert_eq!(
            resolve(arg, Some(DriverType::Normal)).unwrap().name,
            spec.name
        );
        let other = resolve(arg, Some(DriverType::Defensive)).unwrap();
        assert_eq!(other.name, "following-medium-normal-defensive");
        assert_eq!(other.driver, DriverType::Defensive);
    }
}
