use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use log::warn;

use super::{DaqError, LogRecord, Manifest, LOG_FILE, MANIFEST_FILE};
use crate::msgs::Message;

/// A finished recording loaded from disk.
#[derive(Debug, Clone)]
pub struct Session {
    dir: PathBuf,
    manifest: Manifest,
    /// Valid records in file order.
    records: Vec<(LogRecord, Message)>,
    corrupt: u64,
    /// Per topic, indices into `records` sorted by stamp.
    by_topic: BTreeMap<String, Vec<usize>>,
}

impl Session {
    pub fn open(dir: impl AsRef<Path>) -> Result<Self, DaqError> {
        let dir = dir.as_ref().to_path_buf();
        let mpath = dir.join(MANIFEST_FILE);
        let raw = fs::read(&mpath).map_err(|e| DaqError::io(&mpath, e))?;
        let manifest: Manifest = serde_json::from_slice(&raw)
            .map_err(|e| DaqError::Manifest { path: mpath.clone(), reason: e.to_string() })?;
        let lpath = dir.join(LOG_FILE);
        let text = match fs::read(&lpath) {
            Ok(bytes) => String::from_utf8_lossy(&bytes).into_owned(),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => String::new(),
            Err(e) => return Err(DaqError::io(&lpath, e)),
        };
        let mut records = Vec::new();
        let mut corrupt = 0;
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            match LogRecord::parse_line(line) {
                Some(r) => records.push(r),
                None => {
                    warn!("{}:{}: skipping corrupt record", lpath.display(), i + 1);
                    corrupt += 1;
                }
            }
        }
        let mut by_topic: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (i, (r, _)) in records.iter().enumerate() {
            by_topic.entry(r.topic.clone()).or_default().push(i);
        }
        for idx in by_topic.values_mut() {
            idx.sort_by(|&a, &b| records[a].0.t.total_cmp(&records[b].0.t));
        }
        Ok(Session { dir, manifest, records, corrupt, by_topic })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    pub fn records(&self) -> impl Iterator<Item = &LogRecord> {
        self.records.iter().map(|(r, _)| r)
    }

    pub(crate) fn entries(&self) -> &[(LogRecord, Message)] {
        &self.records
    }

    /// Lines that failed to parse or decode.
    pub fn corrupt_lines(&self) -> u64 {
        self.corrupt
    }

    /// Topics in the manifest plus any that appear only in the log.
    pub fn topics(&self) -> Vec<String> {
        let mut t: Vec<String> = self.manifest.counts.keys().cloned().collect();
        for k in self.by_topic.keys() {
            if !t.contains(k) {
                t.push(k.clone());
            }
        }
        t.sort();
        t
    }

    /// Records on one topic ordered by stamp.
    pub fn topic_records(&self, topic: &str) -> Vec<&LogRecord> {
        self.by_topic
            .get(topic)
            .map(|idx| idx.iter().map(|&i| &self.records[i].0).collect())
            .unwrap_or_default()
    }

    /// For each topic, the record nearest `t` within `tolerance` seconds.
    /// Equidistant candidates resolve to the earlier one.
    pub fn align(&self, t: f64, tolerance: f64) -> BTreeMap<String, Option<&LogRecord>> {
        self.topics()
            .into_iter()
            .map(|topic| {
                let hit = self.by_topic.get(&topic).and_then(|idx| self.nearest(idx, t, tolerance));
                (topic, hit)
            })
            .collect()
    }

    fn nearest(&self, idx: &[usize], t: f64, tolerance: f64) -> Option<&LogRecord> {
        let stamp = |k: usize| self.records[idx[k]].0.t;
        let after = idx.partition_point(|&i| self.records[i].0.t < t);
        let mut best: Option<usize> = None;
        if after > 0 {
            // earliest record sharing the stamp just below t
            let s = stamp(after - 1);
            best = Some(idx[..after].partition_point(|&i| self.records[i].0.t < s));
        }
        if after < idx.len() {
            let closer = best.is_none_or(|b| stamp(after) - t < t - stamp(b));
            if closer {
                best = Some(after);
            }
        }
        best.filter(|&b| (stamp(b) - t).abs() <= tolerance).map(|b| &self.records[idx[b]].0)
    }
}
