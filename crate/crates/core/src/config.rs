//! Global engine configuration, read from and written to TOML.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::EstimatorConfig;
use crate::planner::PlannerConfig;
use crate::risk::RiskConfig;
use crate::warning::WarningConfig;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    pub risk: RiskConfig,
    pub planner: PlannerConfig,
    pub estimator: EstimatorConfig,
    pub warning: WarningConfig,
}

impl EngineConfig {
    pub fn validate(&self) -> Result<()> {
        self.risk.validate()?;
        self.planner.validate(self.risk.horizon)?;
        self.estimator.validate()?;
        self.warning.validate()
    }

    pub fn from_toml(text: &str, origin: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Parse {
            path: origin.to_string(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse {
            path: "engine config".into(),
            message: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text, &path.display().to_string())
    }
}
