use std::collections::VecDeque;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipeConfig {
    /// Transmission time of one byte, seconds.
    pub per_byte_latency: f64,
    /// Probability that any single byte is lost.
    pub drop_probability: f64,
}

impl Default for PipeConfig {
    fn default() -> Self {
        PipeConfig { per_byte_latency: 0.0, drop_probability: 0.0 }
    }
}

/// One direction of the simulated serial line, clocked by simulation time.
///
/// Bytes go out back to back: each one becomes readable `per_byte_latency`
/// after the previous one finished. Drops are drawn from a seeded generator.
#[derive(Debug, Clone)]
pub struct BytePipe {
    cfg: PipeConfig,
    rng: StdRng,
    in_flight: VecDeque<(f64, u8)>,
    line_free_at: f64,
    dropped: u64,
    delivered: u64,
}

impl BytePipe {
    pub fn new(cfg: PipeConfig, seed: u64) -> Self {
        BytePipe {
            cfg,
            rng: StdRng::seed_from_u64(seed),
            in_flight: VecDeque::new(),
            line_free_at: 0.0,
            dropped: 0,
            delivered: 0,
        }
    }

    pub fn write(&mut self, now: f64, bytes: &[u8]) {
        for &b in bytes {
            let arrive = self.line_free_at.max(now) + self.cfg.per_byte_latency;
            self.line_free_at = arrive;
            if self.cfg.drop_probability > 0.0 && self.rng.gen::<f64>() < self.cfg.drop_probability {
                self.dropped += 1;
                continue;
            }
            self.in_flight.push_back((arrive, b));
        }
    }

    /// Takes every byte that has arrived by `now`.
    pub fn read(&mut self, now: f64) -> Vec<u8> {
        let mut out = Vec::new();
        while let Some(&(t, b)) = self.in_flight.front() {
            if t > now {
                break;
            }
            out.push(b);
            self.in_flight.pop_front();
        }
        self.delivered += out.len() as u64;
        out
    }

    pub fn dropped(&self) -> u64 {
        self.dropped
    }

    pub fn delivered(&self) -> u64 {
        self.delivered
    }

    pub fn in_flight(&self) -> usize {
        self.in_flight.len()
    }
}
