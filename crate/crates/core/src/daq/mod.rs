//! Data acquisition: records bus topics to JSON Lines, aligns records across
//! topics, and replays sessions back onto the bus.
//!
//! A session is a directory holding `log.jsonl` (one [`LogRecord`] per line)
//! and, once the recorder has stopped, `manifest.json`.

mod recorder;
mod replay;
mod session;

use std::collections::BTreeMap;
use std::io;
use std::path::PathBuf;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine as _;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bus::BusError;
use crate::msgs::{topics, Message, SchemaId};

pub use recorder::Recorder;
pub use replay::{replay_session, ReplaySummary, Replayer};
pub use session::Session;

pub const LOG_FILE: &str = "log.jsonl";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const RECORDER_NODE: &str = "data_acquisition";
pub const REPLAY_NODE: &str = "replay";

#[derive(Debug, Error)]
pub enum DaqError {
    #[error("invalid recording config: {0}")]
    InvalidConfig(String),
    #[error("topic {0} is not known to the bus")]
    UnknownTopic(String),
    #[error("session {0} already exists")]
    SessionExists(PathBuf),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("bad manifest {path}: {reason}")]
    Manifest { path: PathBuf, reason: String },
    #[error("{topic}: record at t={t} is older than the previous one at t={prev}")]
    NonMonotonic { topic: String, prev: f64, t: f64 },
    #[error("replay rate must be positive and finite, got {0}")]
    InvalidRate(f64),
    #[error(transparent)]
    Bus(#[from] BusError),
}

impl DaqError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        DaqError::Io { path: path.into(), source }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RecordingConfig {
    pub topics: Vec<String>,
    pub output_dir: PathBuf,
    pub session_name: String,
    /// Seconds of simulation time between flushes to disk.
    pub flush_interval: f64,
}

impl Default for RecordingConfig {
    fn default() -> Self {
        RecordingConfig {
            topics: [topics::ENCODER_PULSE, topics::IMU, topics::SCAN, topics::CAMERA_STUB]
                .map(String::from)
                .to_vec(),
            output_dir: PathBuf::from("sessions"),
            session_name: "session".into(),
            flush_interval: 1.0,
        }
    }
}

impl RecordingConfig {
    pub fn validate(&self) -> Result<(), DaqError> {
        if self.topics.is_empty() {
            return Err(DaqError::InvalidConfig("topics must not be empty".into()));
        }
        let name_ok = !self.session_name.is_empty()
            && !self.session_name.contains(['/', '\\'])
            && self.session_name != "."
            && self.session_name != "..";
        if !name_ok {
            return Err(DaqError::InvalidConfig(format!("bad session_name {:?}", self.session_name)));
        }
        if !(self.flush_interval.is_finite() && self.flush_interval > 0.0) {
            return Err(DaqError::InvalidConfig(format!(
                "flush_interval must be positive, got {}",
                self.flush_interval
            )));
        }
        Ok(())
    }

    pub fn session_dir(&self) -> PathBuf {
        self.output_dir.join(&self.session_name)
    }
}

/// One line of `log.jsonl`. `data` is the base64 of the binary payload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub t: f64,
    pub topic: String,
    pub seq: u32,
    pub schema: u16,
    pub data: String,
}

impl LogRecord {
    pub fn from_message(topic: &str, seq: u32, msg: &Message) -> Self {
        LogRecord {
            t: msg.stamp().0,
            topic: topic.to_string(),
            seq,
            schema: msg.schema() as u16,
            data: B64.encode(msg.to_bytes()),
        }
    }

    pub fn payload(&self) -> Option<Vec<u8>> {
        B64.decode(&self.data).ok()
    }

    pub fn message(&self) -> Option<Message> {
        let schema = SchemaId::from_u16(self.schema)?;
        Message::from_bytes(schema, &self.payload()?).ok()
    }

    /// Parses and fully validates one log line.
    pub fn parse_line(line: &str) -> Option<(LogRecord, Message)> {
        let rec: LogRecord = serde_json::from_str(line).ok()?;
        if !rec.t.is_finite() {
            return None;
        }
        let msg = rec.message()?;
        Some((rec, msg))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub counts: BTreeMap<String, u64>,
    /// Simulation time the recorder started and stopped.
    pub t_start: f64,
    pub t_end: f64,
    pub truncated: bool,
    /// Messages lost to subscriber queue overflow.
    #[serde(default)]
    pub dropped: u64,
}
