//! Emulated drive-by-wire control unit.
//!
//! Two microcontrollers share the work. The slave reads the drive-motor
//! encoder and exposes its count over I2C. The master reads the steering
//! encoder, copies the drive count from the slave, drives both H-bridges and
//! runs the serial endpoint: it consumes `/vehicle_control` frames and
//! publishes `/encoder_pulse` and `/heartbeat`.
//!
//! Everything advances only through [`ControlUnit::tick`], called at the
//! fixed firmware rate, so identical inputs give identical outputs.

pub mod quadrature;

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

pub use quadrature::{quad_step, PhasePair, QuadratureDecoder, StepResult};

use crate::msgs::{EncoderPulse, Heartbeat, Message, Timestamp, VehicleControl};
use crate::wire::{Frame, StreamDecoder, TopicRegistry};

/// Arduino pin assignments of the two H-bridge channels.
pub mod pins {
    pub const STEER_ENABLE: u8 = 8;
    pub const STEER_PWMA: u8 = 6;
    pub const STEER_PWMB: u8 = 5;
    pub const STEER_SENSOR: &str = "A0";
    pub const DRIVE_ENABLE: u8 = 12;
    pub const DRIVE_PWMA: u8 = 9;
    pub const DRIVE_PWMB: u8 = 10;
    pub const DRIVE_SENSOR: &str = "A1";
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PwmChannel {
    Steer,
    Drive,
}

impl PwmChannel {
    pub fn enable_pin(self) -> u8 {
        match self {
            PwmChannel::Steer => pins::STEER_ENABLE,
            PwmChannel::Drive => pins::DRIVE_ENABLE,
        }
    }

    /// PWMA carries forward duty, PWMB reverse.
    pub fn pwm_pins(self) -> (u8, u8) {
        match self {
            PwmChannel::Steer => (pins::STEER_PWMA, pins::STEER_PWMB),
            PwmChannel::Drive => (pins::DRIVE_PWMA, pins::DRIVE_PWMB),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PwmCommand {
    pub channel: PwmChannel,
    /// Signed duty in [-1, 1].
    pub duty: f64,
}

impl PwmCommand {
    pub fn new(channel: PwmChannel, duty: f64) -> Self {
        PwmCommand { channel, duty: duty.clamp(-1.0, 1.0) }
    }

    /// Pin that is switching and its 8-bit `analogWrite` level. The other
    /// PWM pin of the channel is held low.
    pub fn active_pin(&self) -> (u8, u8) {
        let (a, b) = self.channel.pwm_pins();
        let level = (self.duty.abs() * 255.0).round() as u8;
        if self.duty >= 0.0 {
            (a, level)
        } else {
            (b, level)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FirmwareConfig {
    pub tick_hz: u32,
    pub i2c_latency_ticks: u8,
    /// `/encoder_pulse` period in ticks.
    pub publish_period_ticks: u32,
    pub heartbeat_period_ticks: u32,
    /// Seconds without a command before both outputs are forced to zero.
    pub watchdog_timeout: f64,
}

impl Default for FirmwareConfig {
    fn default() -> Self {
        FirmwareConfig {
            tick_hz: 1000,
            i2c_latency_ticks: 1,
            publish_period_ticks: 20,
            heartbeat_period_ticks: 1000,
            watchdog_timeout: 0.5,
        }
    }
}

impl FirmwareConfig {
    pub fn dt(&self) -> f64 {
        1.0 / self.tick_hz as f64
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FirmwareCounters {
    pub accepted: u64,
    pub clamp_events: u64,
    pub stale_events: u64,
    pub malformed: u64,
}

/// What happened to an incoming command.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ControlOutcome {
    Accepted,
    Clamped,
    Stale,
    Malformed,
}

#[derive(Debug, Clone)]
struct Master {
    steer_decoder: QuadratureDecoder,
    /// Drive count as last read over I2C.
    drive_count_view: i64,
    last_control: Option<VehicleControl>,
    watchdog_deadline: Timestamp,
}

#[derive(Debug, Clone)]
struct Slave {
    drive_decoder: QuadratureDecoder,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TickOutput {
    pub steer: PwmCommand,
    pub drive: PwmCommand,
    pub frames: Vec<Frame>,
}

impl TickOutput {
    pub fn encoded_frames(&self) -> Vec<u8> {
        let mut out = Vec::new();
        for f in &self.frames {
            f.encode_into(&mut out);
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct ControlUnit {
    cfg: FirmwareConfig,
    master: Master,
    slave: Slave,
    /// I2C register snapshots in flight from slave to master.
    i2c: VecDeque<i64>,
    serial_rx: StreamDecoder,
    registry: TopicRegistry,
    counters: FirmwareCounters,
    ticks: u64,
    pulse_seq: u32,
    heartbeat_seq: u32,
}

impl ControlUnit {
    pub fn new(cfg: FirmwareConfig) -> Self {
        ControlUnit {
            master: Master {
                steer_decoder: QuadratureDecoder::default(),
                drive_count_view: 0,
                last_control: None,
                watchdog_deadline: Timestamp::ZERO,
            },
            slave: Slave { drive_decoder: QuadratureDecoder::default() },
            i2c: std::iter::repeat_n(0, cfg.i2c_latency_ticks as usize).collect(),
            serial_rx: StreamDecoder::new(),
            registry: TopicRegistry::standard(),
            counters: FirmwareCounters::default(),
            ticks: 0,
            pulse_seq: 0,
            heartbeat_seq: 0,
            cfg,
        }
    }

    pub fn config(&self) -> &FirmwareConfig {
        &self.cfg
    }

    pub fn counters(&self) -> FirmwareCounters {
        self.counters
    }

    pub fn serial_stats(&self) -> crate::wire::DecoderStats {
        self.serial_rx.stats()
    }

    pub fn ticks(&self) -> u64 {
        self.ticks
    }

    pub fn last_control(&self) -> Option<VehicleControl> {
        self.master.last_control
    }

    pub fn watchdog_deadline(&self) -> Timestamp {
        self.master.watchdog_deadline
    }

    pub fn steer_count(&self) -> i64 {
        self.master.steer_decoder.count()
    }

    /// Drive count as the slave sees it.
    pub fn drive_count(&self) -> i64 {
        self.slave.drive_decoder.count()
    }

    /// Drive count as the master last read it over I2C.
    pub fn master_drive_count(&self) -> i64 {
        self.master.drive_count_view
    }

    pub fn invalid_transitions(&self) -> u64 {
        self.master.steer_decoder.invalid_transitions()
            + self.slave.drive_decoder.invalid_transitions()
    }

    /// Applies a command. Stale sequence numbers are dropped; out-of-range
    /// fields are clamped; non-finite fields are malformed.
    pub fn handle_vehicle_control(&mut self, msg: VehicleControl, now: Timestamp) -> ControlOutcome {
        if !(msg.steering.is_finite() && msg.throttle.is_finite()) {
            self.counters.malformed += 1;
            return ControlOutcome::Malformed;
        }
        if let Some(last) = self.master.last_control {
            if msg.seq <= last.seq {
                self.counters.stale_events += 1;
                return ControlOutcome::Stale;
            }
        }
        let clamped = VehicleControl::new(msg.steering, msg.throttle, msg.stamp, msg.seq);
        let outcome = if clamped != msg {
            self.counters.clamp_events += 1;
            ControlOutcome::Clamped
        } else {
            ControlOutcome::Accepted
        };
        self.counters.accepted += 1;
        self.master.last_control = Some(clamped);
        self.master.watchdog_deadline = Timestamp(now.0 + self.cfg.watchdog_timeout);
        outcome
    }

    /// Feeds bytes from the host side of the serial line.
    pub fn receive(&mut self, bytes: &[u8], now: Timestamp) {
        for frame in self.serial_rx.feed(bytes) {
            match self.registry.message_from(&frame) {
                Ok(Message::VehicleControl(vc)) => {
                    self.handle_vehicle_control(vc, now);
                }
                Ok(_) | Err(_) => self.counters.malformed += 1,
            }
        }
    }

    /// One firmware tick. `steer_edges` and `drive_edges` are the channel
    /// states seen since the previous tick, oldest first.
    pub fn tick(&mut self, steer_edges: &[PhasePair], drive_edges: &[PhasePair], now: Timestamp) -> TickOutput {
        self.ticks += 1;

        self.slave.drive_decoder.update_all(drive_edges);
        self.master.steer_decoder.update_all(steer_edges);

        self.i2c.push_back(self.slave.drive_decoder.count());
        if let Some(v) = self.i2c.pop_front() {
            self.master.drive_count_view = v;
        }

        let (steer, drive) = match self.master.last_control {
            // Expired once the full timeout has elapsed; the margin absorbs tick rounding.
            Some(c) if now.0 + 1e-9 < self.master.watchdog_deadline.0 => (c.steering, c.throttle),
            _ => (0.0, 0.0),
        };

        let mut frames = Vec::new();
        if self.ticks.is_multiple_of(self.cfg.publish_period_ticks as u64) {
            let pulse = EncoderPulse {
                drive_count: self.master.drive_count_view,
                steer_count: self.master.steer_decoder.count(),
                stamp: now,
                seq: self.pulse_seq,
            };
            self.pulse_seq = self.pulse_seq.wrapping_add(1);
            frames.push(self.frame(&Message::EncoderPulse(pulse)));
        }
        if self.ticks.is_multiple_of(self.cfg.heartbeat_period_ticks as u64) {
            let stats = self.serial_rx.stats();
            let hb = Heartbeat {
                frames_ok: stats.frames_ok,
                frames_bad_checksum: stats.frames_bad_checksum,
                invalid_transitions: self.invalid_transitions(),
                clamp_events: self.counters.clamp_events,
                stale_events: self.counters.stale_events,
                malformed: self.counters.malformed,
                stamp: now,
                seq: self.heartbeat_seq,
            };
            self.heartbeat_seq = self.heartbeat_seq.wrapping_add(1);
            frames.push(self.frame(&Message::Heartbeat(hb)));
        }

        TickOutput {
            steer: PwmCommand::new(PwmChannel::Steer, steer),
            drive: PwmCommand::new(PwmChannel::Drive, drive),
            frames,
        }
    }

    fn frame(&self, msg: &Message) -> Frame {
        // Both outbound schemas are registered and far below the size limit.
        self.registry.frame_for(msg).expect("outbound firmware message fits a frame")
    }
}
