//! CSV and JSON writers for traces, reports and risk maps.
//!
//! All numbers are written with Rust's shortest round-trip formatting, so a
//! value read back from a file is bitwise identical to the one written.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimator::EstimationSample;
use crate::simulator::SimulationTrace;
use crate::warning::WarningRecord;

pub const ESTIMATION_HEADER: &str = "t,a_def,a_conf,a_driver,alpha_hat,interacting";
pub const WARNING_HEADER: &str = "t,w_personalized,r_baseline,personalized_warn,baseline_warn,\
driver_wants_warning,personalized_outcome,baseline_outcome";
pub const TRAJECTORY_HEADER: &str = "t,vehicle,path,position,velocity,acceleration";

pub fn estimation_csv(samples: &[EstimationSample]) -> String {
    let mut out = format!("{ESTIMATION_HEADER}\n");
    for s in samples {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            s.timestamp,
            s.a_def,
            s.a_conf,
            s.a_driver,
            s.alpha_hat.value(),
            s.interacting
        );
    }
    out
}

pub fn warning_csv(records: &[WarningRecord]) -> String {
    let mut out = format!("{WARNING_HEADER}\n");
    for r in records {
        let _ = writeln!(
            out,
            "{},{:e},{:e},{},{},{},{},{}",
            r.timestamp,
            r.personalized_signal,
            r.baseline_signal,
            r.personalized_warn,
            r.baseline_warn,
            r.driver_wants_warning,
            r.personalized_outcome,
            r.baseline_outcome
        );
    }
    out
}

/// One row per vehicle and snapshot. The ego is vehicle `ego`, the others
/// are numbered from 0 in scenario order.
pub fn trajectory_csv(trace: &SimulationTrace, ego_path: usize, other_paths: &[usize]) -> String {
    let mut out = format!("{TRAJECTORY_HEADER}\n");
    for snap in &trace.snapshots {
        let e = &snap.ego;
        let _ = writeln!(
            out,
            "{},ego,{ego_path},{},{},{}",
            snap.timestamp, e.path_position, e.velocity, e.acceleration
        );
        for (i, (o, path)) in snap.others.iter().zip(other_paths).enumerate() {
            let _ = writeln!(
                out,
                "{},{i},{path},{},{},{}",
                snap.timestamp, o.path_position, o.velocity, o.acceleration
            );
        }
    }
    out
}

pub fn to_json<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value).map_err(|e| Error::invalid("json output", e.to_string()))
}

/// Write `contents` to `path`, creating parent directories as needed.
pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    let io_err = |source| Error::Io {
        path: path.display().to_string(),
        source,
    };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io_err)?;
    }
    std::fs::write(path, contents).map_err(io_err)
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    write_file(path, &(to_json(value)? + "\n"))
}

/// Index of the files produced by one command.
#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    /// Seconds since the Unix epoch. The only field that differs between two
    /// invocations with the same inputs.
    pub created_unix: u64,
    pub engine_config: String,
    pub files: Vec<String>,
}

impl Manifest {
    pub fn new(command: impl Into<String>, engine_config: impl Into<String>) -> Self {
        let created_unix = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        Self {
            tool: "riskwarn".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            created_unix,
            engine_config: engine_config.into(),
            files: Vec::new(),
        }
    }
}

/// Writes files below one directory and remembers their relative names.
#[derive(Debug)]
pub struct OutputDir {
    root: std::path::PathBuf,
    written: Vec<String>,
}

impl OutputDir {
    pub fn new(root: impl Into<std::path::PathBuf>) -> Result<Self> {
        let root = root.into();
        std::fs::create_dir_all(&root).map_err(|source| Error::Io {
            path: root.display().to_string(),
            source,
        })?;
        Ok(Self {
            root,
            written: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn text(&mut self, name: &str, contents: &str) -> Result<std::path::PathBuf> {
        let path = self.root.join(name);
        write_file(&path, contents)?;
        self.written.push(name.to_string());
        Ok(path)
    }

    pub fn json<T: Serialize + ?Sized>(
        &mut self,
        name: &str,
        value: &T,
    ) -> Result<std::path::PathBuf> {
        self.text(name, &(to_json(value)? + "\n"))
    }

    pub fn written(&self) -> &[String] {
        &self.written
    }

    /// Write `manifest.json` listing every file written so far.
    pub fn finish(mut self, mut manifest: Manifest) -> Result<Vec<String>> {
        manifest.files = self.written.clone();
        self.json("manifest.json", &manifest)?;
        Ok(self.written)
    }
}
