use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::PathBuf;

use log::{debug, error, info};

use super::{DaqError, LogRecord, Manifest, RecordingConfig, LOG_FILE, MANIFEST_FILE, RECORDER_NODE};
use crate::bus::{Bus, NodeHandle, Subscription};
use crate::msgs::Timestamp;

const QUEUE_DEPTH: u16 = 1024;

/// The `data_acquisition` node. All file appends go through [`Recorder::spin_once`]
/// on the caller's thread, so there is exactly one writer.
pub struct Recorder {
    cfg: RecordingConfig,
    dir: PathBuf,
    node: Option<NodeHandle>,
    subs: Vec<Subscription>,
    sink: Option<Box<dyn Write + Send>>,
    pending: Vec<u8>,
    pending_counts: BTreeMap<String, u64>,
    last_t: BTreeMap<String, f64>,
    manifest: Manifest,
    last_flush: f64,
}

impl std::fmt::Debug for Recorder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Recorder")
            .field("dir", &self.dir)
            .field("manifest", &self.manifest)
            .field("pending_bytes", &self.pending.len())
            .finish_non_exhaustive()
    }
}

impl Recorder {
    /// Creates `<output_dir>/<session_name>/` and subscribes to every
    /// configured topic. Each topic must already be advertised on the bus.
    pub fn start(bus: &Bus, cfg: RecordingConfig, now: Timestamp) -> Result<Self, DaqError> {
        Self::start_inner(bus, cfg, now, None)
    }

    /// Like [`Recorder::start`] but appends log lines to `sink` instead of
    /// `log.jsonl`. The manifest is still written to the session directory.
    pub fn start_with_sink(
        bus: &Bus,
        cfg: RecordingConfig,
        now: Timestamp,
        sink: Box<dyn Write + Send>,
    ) -> Result<Self, DaqError> {
        Self::start_inner(bus, cfg, now, Some(sink))
    }

    fn start_inner(
        bus: &Bus,
        cfg: RecordingConfig,
        now: Timestamp,
        sink: Option<Box<dyn Write + Send>>,
    ) -> Result<Self, DaqError> {
        cfg.validate()?;
        if let Some(unknown) = cfg.topics.iter().find(|t| bus.topic_schema(t).is_none()) {
            return Err(DaqError::UnknownTopic(unknown.clone()));
        }
        let dir = cfg.session_dir();
        if dir.join(LOG_FILE).exists() || dir.join(MANIFEST_FILE).exists() {
            return Err(DaqError::SessionExists(dir));
        }
        fs::create_dir_all(&dir).map_err(|e| DaqError::io(&dir, e))?;
        let sink = match sink {
            Some(s) => s,
            None => {
                let path = dir.join(LOG_FILE);
                let f: File = OpenOptions::new()
                    .write(true)
                    .create_new(true)
                    .open(&path)
                    .map_err(|e| DaqError::io(&path, e))?;
                Box::new(f)
            }
        };
        let node = bus.node(RECORDER_NODE)?;
        let subs = cfg
            .topics
            .iter()
            .map(|t| node.subscribe(t, QUEUE_DEPTH))
            .collect::<Result<Vec<_>, _>>()?;
        info!("recording {} topics to {}", cfg.topics.len(), dir.display());
        let manifest = Manifest {
            counts: cfg.topics.iter().map(|t| (t.clone(), 0)).collect(),
            t_start: now.0,
            t_end: now.0,
            ..Manifest::default()
        };
        Ok(Recorder {
            cfg,
            dir,
            node: Some(node),
            subs,
            sink: Some(sink),
            pending: Vec::new(),
            pending_counts: BTreeMap::new(),
            last_t: BTreeMap::new(),
            manifest,
            last_flush: now.0,
        })
    }

    pub fn session_dir(&self) -> &PathBuf {
        &self.dir
    }

    pub fn is_recording(&self) -> bool {
        self.sink.is_some()
    }

    /// Counts of records already committed to the sink.
    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    /// Buffers everything queued on the subscriptions and flushes when the
    /// flush interval has elapsed. A record whose stamp runs backwards on its
    /// topic is refused with [`DaqError::NonMonotonic`]; the rest of the
    /// batch is still written.
    pub fn spin_once(&mut self, now: Timestamp) -> Result<(), DaqError> {
        if self.sink.is_none() {
            return Ok(());
        }
        let mut first_err = None;
        for sub in &self.subs {
            for env in sub.drain() {
                let rec = LogRecord::from_message(&env.topic, env.seq, &env.msg);
                if let Some(&prev) = self.last_t.get(&rec.topic) {
                    if rec.t < prev {
                        first_err.get_or_insert(DaqError::NonMonotonic { topic: rec.topic.clone(), prev, t: rec.t });
                        continue;
                    }
                }
                self.last_t.insert(rec.topic.clone(), rec.t);
                serde_json::to_writer(&mut self.pending, &rec).expect("log record serializes");
                self.pending.push(b'\n');
                *self.pending_counts.entry(rec.topic).or_default() += 1;
            }
        }
        if now.0 - self.last_flush >= self.cfg.flush_interval {
            self.flush(now);
        }
        first_err.map_or(Ok(()), Err)
    }

    fn flush(&mut self, now: Timestamp) {
        self.last_flush = now.0;
        let Some(sink) = self.sink.as_mut() else { return };
        let res = sink.write_all(&self.pending).and_then(|_| sink.flush());
        self.pending.clear();
        let counts = std::mem::take(&mut self.pending_counts);
        match res {
            Ok(()) => {
                debug!("daq flush at t={:.3}", now.0);
                for (topic, n) in counts {
                    *self.manifest.counts.entry(topic).or_default() += n;
                }
            }
            Err(e) => {
                error!("log write failed at t={:.3}, recording stopped: {e}", now.0);
                self.manifest.truncated = true;
                self.sink = None;
                self.subs.clear();
            }
        }
    }

    /// Flushes, writes `manifest.json`, and leaves the bus.
    pub fn stop(mut self, now: Timestamp) -> Result<Manifest, DaqError> {
        self.spin_once(now).ok();
        self.flush(now);
        self.manifest.dropped = self.subs.iter().map(Subscription::dropped).sum();
        self.manifest.t_end = now.0;
        self.subs.clear();
        self.sink = None;
        if let Some(node) = self.node.take() {
            node.shutdown();
        }
        let path = self.dir.join(MANIFEST_FILE);
        let json = serde_json::to_vec_pretty(&self.manifest).expect("manifest serializes");
        fs::write(&path, json).map_err(|e| DaqError::io(&path, e))?;
        info!(
            "recording stopped: {} records{}",
            self.manifest.counts.values().sum::<u64>(),
            if self.manifest.truncated { " (truncated)" } else { "" }
        );
        Ok(self.manifest)
    }
}
