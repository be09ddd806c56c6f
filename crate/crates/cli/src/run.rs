//! Scheduler loops behind the subcommands.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use anyhow::{Context, Result};
use log::{debug, info};

use mir_core::config::BringupConfig;
use mir_core::daq::{Manifest, RecordingConfig};
use mir_core::sim::{JoyScript, Sim};

use crate::bridge::Bridge;

/// Bridge fan-out runs every this many ticks (100 Hz at the default rate).
const PUMP_TICKS: u64 = 10;

#[derive(Debug, Clone)]
pub struct BringupOptions {
    pub config: BringupConfig,
    pub script: JoyScript,
    pub headless: bool,
    /// Sim seconds to run; `None` runs until stopped.
    pub duration: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BringupReport {
    pub sim_time: f64,
    pub wall_time: f64,
    pub manifest: Option<Manifest>,
}

/// A recording config for `session_dir`, keeping topics and flush interval
/// from `base`.
pub fn recording_at(base: Option<&RecordingConfig>, session_dir: &Path) -> RecordingConfig {
    let mut cfg = base.cloned().unwrap_or_default();
    cfg.output_dir = session_dir.parent().map(Path::to_path_buf).unwrap_or_default();
    cfg.session_name = session_dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    cfg
}

/// Runs the standard graph until `duration` elapses or `stop` is set, then
/// flushes any recording and tears everything down.
pub fn bringup(opts: BringupOptions, stop: Arc<AtomicBool>) -> Result<BringupReport> {
    let cfg = opts.config;
    let mut sim = Sim::new(&cfg, opts.script).context("bringup failed")?;
    let mut bridge = if opts.headless {
        None
    } else {
        Some(Bridge::start(sim.bus(), cfg.bridge_port, sim.joy_input())?)
    };
    let started = Instant::now();
    let end_tick = opts.duration.map(|d| (d / sim.dt()).round() as u64);
    while !stop.load(Ordering::Relaxed) && end_tick.is_none_or(|e| sim.ticks() < e) {
        sim.step()?;
        if sim.ticks() % PUMP_TICKS == 0 {
            if let Some(b) = bridge.as_mut() {
                b.pump();
            }
            if cfg.realtime {
                pace(started, sim.now().0);
            }
        }
    }
    let sim_time = sim.now().0;
    if let Some(b) = bridge.take() {
        debug!("bridge stats at shutdown: {:?}", b.stats());
        b.shutdown();
    }
    let manifest = sim.shutdown()?;
    let wall_time = started.elapsed().as_secs_f64();
    info!("ran {sim_time:.3} sim-s in {wall_time:.3} wall-s");
    Ok(BringupReport { sim_time, wall_time, manifest })
}

fn pace(started: Instant, sim_time: f64) {
    let ahead = sim_time - started.elapsed().as_secs_f64();
    if ahead > 0.0 {
        thread::sleep(Duration::from_secs_f64(ahead));
    }
}

/// Scratch directory for a throwaway recorder, removed on drop.
pub struct ScratchDir(PathBuf);

impl ScratchDir {
    pub fn new(tag: &str) -> Result<Self> {
        let nanos = std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map(|d| d.as_nanos()).unwrap_or(0);
        let path = std::env::temp_dir().join(format!("mir-{tag}-{}-{nanos}", std::process::id()));
        std::fs::create_dir_all(&path).with_context(|| format!("cannot create {}", path.display()))?;
        Ok(ScratchDir(path))
    }

    pub fn path(&self) -> &Path {
        &self.0
    }
}

impl Drop for ScratchDir {
    fn drop(&mut self) {
        let _ = std::fs::remove_dir_all(&self.0);
    }
}
