//! `riskwarn` command-line front end.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use riskwarn::{EngineConfig, Interpolation};

#[derive(Debug, Parser)]
#[command(
    name = "riskwarn",
    version,
    about = "Personalized collision-risk warning campaigns"
)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// Engine configuration (TOML). Built-in defaults when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory for CSV/JSON artifacts.
    #[arg(
        long,
        global = true,
        env = "RISKWARN_OUT",
        default_value = "riskwarn-out",
        value_name = "DIR"
    )]
    pub out: PathBuf,
    /// Override the estimator interpolation.
    #[arg(long, global = true, value_name = "linear|sigmoid")]
    pub interp: Option<Interpolation>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the estimation campaign and print the per-type table.
    Estimate {
        /// Built-in scenario, layout name or scenario TOML file. Repeatable;
        /// all built-in layouts when omitted.
        #[arg(long, value_name = "NAME|PATH")]
        scenario: Vec<String>,
        /// defensive, normal, confident, alpha=<float> or all.
        #[arg(long, default_value = "all")]
        driver: String,
    },
    /// Run one scenario with the personalized and the baseline warning.
    Warn {
        #[arg(long, value_name = "NAME|PATH")]
        scenario: String,
        #[arg(long)]
        driver: Option<String>,
    },
    /// Render the Risk Map of the ego at one instant of a scenario.
    Riskmap {
        #[arg(long, value_name = "NAME|PATH")]
        scenario: String,
        #[arg(long)]
        driver: Option<String>,
        /// Simulation time of the rendered scene (s).
        #[arg(long, value_name = "SECONDS")]
        time: f64,
        /// Risk factor of the map; the driver's factor when omitted.
        #[arg(long)]
        alpha: Option<f64>,
    },
    /// Run every acceptance check on the built-in campaign.
    Reproduce,
    /// List the built-in scenarios, or print one as TOML.
    Scenarios { name: Option<String> },
    /// Print the effective engine configuration as TOML.
    Config,
}

pub fn load_config(global: &GlobalArgs) -> riskwarn::Result<EngineConfig> {
    let mut cfg = match &global.config {
        Some(path) => EngineConfig::load(path)?,
        None => EngineConfig::default(),
    };
    if let Some(interp) = global.interp {
        cfg.estimator.interpolation = interp;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Estimate { scenario, driver } => {
            commands::estimate(&cli.global, &scenario, &driver)
        }
        Command::Warn { scenario, driver } => {
            commands::warn(&cli.global, &scenario, driver.as_deref())
        }
        Command::Riskmap {
            scenario,
            driver,
            time,
            alpha,
        } => commands::riskmap(&cli.global, &scenario, driver.as_deref(), time, alpha),
        Command::Reproduce => commands::reproduce(&cli.global),
        Command::Scenarios { name } => commands::scenarios(name.as_deref()),
        Command::Config => commands::config(&cli.global),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
