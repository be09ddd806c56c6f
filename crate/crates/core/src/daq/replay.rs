use std::collections::BTreeMap;
use std::sync::Arc;

use log::info;
use serde::Serialize;

use super::{DaqError, Manifest, Recorder, RecordingConfig, Session, REPLAY_NODE};
use crate::bus::{Bus, NodeHandle, Publisher, TopicSpec};
use crate::msgs::{Message, Timestamp};

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ReplaySummary {
    pub published: BTreeMap<String, u64>,
    pub corrupt: u64,
    /// Simulation time from the first publish to the last.
    pub duration: f64,
}

/// The `replay` node: republishes a session on its original topics, with
/// gaps between stamps divided by the rate multiplier.
#[derive(Debug)]
pub struct Replayer {
    node: Option<NodeHandle>,
    pubs: BTreeMap<String, Publisher>,
    queue: Vec<(f64, String, Arc<Message>)>,
    next: usize,
    rate: f64,
    t0: f64,
    start: Option<f64>,
    last: f64,
    summary: ReplaySummary,
}

impl Replayer {
    pub fn new(bus: &Bus, session: &Session, rate: f64) -> Result<Self, DaqError> {
        if !(rate.is_finite() && rate > 0.0) {
            return Err(DaqError::InvalidRate(rate));
        }
        let node = bus.node(REPLAY_NODE)?;
        let mut pubs = BTreeMap::new();
        let mut queue = Vec::with_capacity(session.entries().len());
        for (rec, msg) in session.entries() {
            if !pubs.contains_key(&rec.topic) {
                let p = node.advertise(TopicSpec::new(rec.topic.clone(), msg.schema()))?;
                pubs.insert(rec.topic.clone(), p);
            }
            queue.push((rec.t, rec.topic.clone(), Arc::new(msg.clone())));
        }
        // Stable, so per-topic order survives ties.
        queue.sort_by(|a, b| a.0.total_cmp(&b.0));
        let t0 = queue.first().map_or(0.0, |q| q.0);
        info!("replaying {} records at {rate}x", queue.len());
        Ok(Replayer {
            node: Some(node),
            pubs,
            queue,
            next: 0,
            rate,
            t0,
            start: None,
            last: 0.0,
            summary: ReplaySummary { corrupt: session.corrupt_lines(), ..Default::default() },
        })
    }

    /// Topics this replay publishes on.
    pub fn topics(&self) -> Vec<String> {
        self.pubs.keys().cloned().collect()
    }

    pub fn is_done(&self) -> bool {
        self.next >= self.queue.len()
    }

    /// Sim time at which the last record is due, once started.
    pub fn end_time(&self) -> Option<f64> {
        let start = self.start?;
        Some(start + self.queue.last().map_or(0.0, |q| (q.0 - self.t0) / self.rate))
    }

    /// Publishes every record due at `now`. The first call fixes the start
    /// of the schedule. Returns the number published.
    pub fn spin_once(&mut self, now: Timestamp) -> Result<usize, DaqError> {
        let start = *self.start.get_or_insert(now.0);
        let mut n = 0;
        while let Some((t, topic, msg)) = self.queue.get(self.next) {
            let due = start + (t - self.t0) / self.rate;
            if due > now.0 + 1e-9 {
                break;
            }
            self.pubs[topic].publish_arc(msg.clone())?;
            *self.summary.published.entry(topic.clone()).or_default() += 1;
            self.last = now.0;
            self.next += 1;
            n += 1;
        }
        Ok(n)
    }

    pub fn summary(&self) -> ReplaySummary {
        let mut s = self.summary.clone();
        s.duration = match self.start {
            Some(start) if self.next > 0 => self.last - start,
            _ => 0.0,
        };
        s
    }

    pub fn shutdown(mut self) -> ReplaySummary {
        let s = self.summary();
        self.pubs.clear();
        if let Some(node) = self.node.take() {
            node.shutdown();
        }
        info!("replay finished: {} published, {} corrupt lines skipped", s.published.values().sum::<u64>(), s.corrupt);
        s
    }
}

/// Replays `session` on a fresh bus with a 1 kHz simulation clock starting at
/// zero, optionally recording the republished stream. With `record`, an
/// empty topic list means every topic in the session.
pub fn replay_session(
    session: &Session,
    rate: f64,
    record: Option<RecordingConfig>,
) -> Result<(ReplaySummary, Option<Manifest>), DaqError> {
    const TICK: f64 = 0.001;
    let bus = Bus::new();
    let mut replayer = Replayer::new(&bus, session, rate)?;
    let mut recorder = match record {
        Some(mut cfg) => {
            if cfg.topics.is_empty() {
                cfg.topics = replayer.topics();
            }
            Some(Recorder::start(&bus, cfg, Timestamp::ZERO)?)
        }
        None => None,
    };
    let mut tick: u64 = 0;
    loop {
        let now = Timestamp(tick as f64 * TICK);
        replayer.spin_once(now)?;
        if let Some(r) = recorder.as_mut() {
            r.spin_once(now)?;
        }
        if replayer.is_done() {
            let manifest = recorder.map(|r| r.stop(now)).transpose()?;
            return Ok((replayer.shutdown(), manifest));
        }
        tick += 1;
    }
}
