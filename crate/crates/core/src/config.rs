//! YAML bringup configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::daq::RecordingConfig;
use crate::firmware::FirmwareConfig;
use crate::plant::{PlantConfig, PlantError};
use crate::teleop::TeleopConfig;
use crate::wire::PipeConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}{message}", line.map(|l| format!("line {l}: ")).unwrap_or_default())]
    Parse { line: Option<usize>, message: String },
    #[error("{field}: {reason}")]
    Invalid { field: String, reason: String },
}

impl ConfigError {
    fn invalid(field: impl Into<String>, reason: impl ToString) -> Self {
        ConfigError::Invalid { field: field.into(), reason: reason.to_string() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BringupConfig {
    pub plant: PlantConfig,
    pub teleop: TeleopConfig,
    pub firmware: FirmwareConfig,
    /// Recording starts with the session when present.
    pub daq: Option<RecordingConfig>,
    /// Line-segment obstacles for the LIDAR; open space when absent.
    pub world_file: Option<PathBuf>,
    pub bridge_port: u16,
    /// Pace the scheduler against the wall clock instead of running flat out.
    pub realtime: bool,
    pub seed: u64,
    /// Serial line in each direction.
    pub link: PipeConfig,
    pub queue_depth: u16,
}

impl Default for BringupConfig {
    fn default() -> Self {
        BringupConfig {
            plant: PlantConfig::default(),
            teleop: TeleopConfig::default(),
            firmware: FirmwareConfig::default(),
            daq: None,
            world_file: None,
            bridge_port: 9090,
            realtime: false,
            seed: 0,
            link: PipeConfig::default(),
            queue_depth: 10,
        }
    }
}

impl BringupConfig {
    /// Parses YAML. Absent keys take defaults, unknown keys are rejected.
    /// A file with no content at all yields the defaults.
    pub fn from_yaml(text: &str) -> Result<Self, ConfigError> {
        let parse_err = |e: serde_yaml::Error| ConfigError::Parse {
            line: e.location().map(|l| l.line()),
            message: e.to_string(),
        };
        let probe: serde_yaml::Value = serde_yaml::from_str(text).map_err(parse_err)?;
        if probe.is_null() {
            return Ok(BringupConfig::default());
        }
        serde_yaml::from_str(text).map_err(parse_err)
    }

    /// Reads, parses, and validates. A relative `world_file` is resolved
    /// against the config file's directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.into(), source })?;
        let mut cfg = Self::from_yaml(&text)?;
        if let (Some(w), Some(base)) = (cfg.world_file.as_mut(), path.parent()) {
            if w.is_relative() {
                *w = base.join(&*w);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.plant.validate().map_err(|e| match e {
            PlantError::InvalidConfig { field, reason } => ConfigError::invalid(format!("plant.{field}"), reason),
            other => ConfigError::invalid("plant", other),
        })?;
        self.teleop.validate().map_err(|e| ConfigError::invalid("teleop", e))?;
        if let Some(daq) = &self.daq {
            daq.validate().map_err(|e| ConfigError::invalid("daq", e))?;
        }
        let fw = &self.firmware;
        if fw.tick_hz == 0 || fw.publish_period_ticks == 0 || fw.heartbeat_period_ticks == 0 {
            return Err(ConfigError::invalid("firmware", "tick_hz and periods must be non-zero"));
        }
        if !(fw.watchdog_timeout.is_finite() && fw.watchdog_timeout > 0.0) {
            return Err(ConfigError::invalid("firmware.watchdog_timeout", "must be positive"));
        }
        if self.bridge_port == 0 {
            return Err(ConfigError::invalid("bridge_port", "must be in 1..=65535"));
        }
        if self.queue_depth == 0 {
            return Err(ConfigError::invalid("queue_depth", "must be at least 1"));
        }
        if !(self.link.per_byte_latency.is_finite() && self.link.per_byte_latency >= 0.0) {
            return Err(ConfigError::invalid("link.per_byte_latency", "must be non-negative"));
        }
        if !(0.0..1.0).contains(&self.link.drop_probability) {
            return Err(ConfigError::invalid("link.drop_probability", "must be in [0, 1)"));
        }
        if let Some(w) = &self.world_file {
            if !w.is_file() {
                return Err(ConfigError::invalid("world_file", format!("{} does not exist", w.display())));
            }
        }
        Ok(())
    }
}
