//! The `joy2vehicle` node: joystick state in, `/vehicle_control` out.

use std::sync::{Arc, Mutex};

use log::{info, warn};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bus::{Bus, BusError, NodeHandle, Publisher, Subscription, TopicSpec};
use crate::msgs::{topics, JoyState, Message, SchemaId, Timestamp, VehicleControl};

pub const NODE_NAME: &str = "joy2vehicle";

/// Seconds without joystick input before the output falls back to neutral.
pub const SILENCE_TIMEOUT: f64 = 1.0;

#[derive(Debug, Error, PartialEq)]
pub enum TeleopError {
    #[error("joystick has no axis {index} (only {available} axes)")]
    MissingAxis { index: usize, available: usize },
    #[error("joystick axis {index} is not finite")]
    NonFiniteAxis { index: usize },
    #[error("invalid teleop config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Bus(#[from] BusError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TeleopConfig {
    pub steering_axis: usize,
    pub throttle_axis: usize,
    pub deadzone: f64,
    pub steering_scale: f64,
    pub throttle_scale: f64,
    pub invert_steering: bool,
    /// Hz.
    pub publish_rate: f64,
}

impl Default for TeleopConfig {
    fn default() -> Self {
        TeleopConfig {
            steering_axis: 0,
            throttle_axis: 1,
            deadzone: 0.05,
            steering_scale: 1.0,
            throttle_scale: 1.0,
            invert_steering: false,
            publish_rate: 20.0,
        }
    }
}

impl TeleopConfig {
    pub fn validate(&self) -> Result<(), TeleopError> {
        if !(0.0..0.5).contains(&self.deadzone) {
            return Err(TeleopError::InvalidConfig(format!("deadzone {} not in [0, 0.5)", self.deadzone)));
        }
        for (name, s) in [("steering_scale", self.steering_scale), ("throttle_scale", self.throttle_scale)] {
            if !(s > 0.0 && s <= 1.0) {
                return Err(TeleopError::InvalidConfig(format!("{name} {s} not in (0, 1]")));
            }
        }
        if !(self.publish_rate.is_finite() && self.publish_rate > 0.0) {
            return Err(TeleopError::InvalidConfig(format!("publish_rate {} must be positive", self.publish_rate)));
        }
        Ok(())
    }

    pub fn publish_period(&self) -> f64 {
        1.0 / self.publish_rate
    }
}

/// Deadzone with re-normalization: zero inside the band, then linear so
/// that full deflection maps to `scale`.
pub fn shape_axis(a: f64, deadzone: f64, scale: f64) -> f64 {
    let mag = a.abs().min(1.0);
    if mag <= deadzone {
        return 0.0;
    }
    (a.signum() * (mag - deadzone) / (1.0 - deadzone) * scale).clamp(-1.0, 1.0)
}

fn axis(j: &JoyState, index: usize) -> Result<f64, TeleopError> {
    let a = *j
        .axes
        .get(index)
        .ok_or(TeleopError::MissingAxis { index, available: j.axes.len() })?;
    if !a.is_finite() {
        return Err(TeleopError::NonFiniteAxis { index });
    }
    Ok(a)
}

/// Maps one joystick reading to a command. Stamp is copied from the reading;
/// seq is left at 0 for the caller to assign.
pub fn joy_to_vehicle(j: &JoyState, cfg: &TeleopConfig) -> Result<VehicleControl, TeleopError> {
    let mut steering = shape_axis(axis(j, cfg.steering_axis)?, cfg.deadzone, cfg.steering_scale);
    if cfg.invert_steering {
        steering = -steering;
    }
    let throttle = shape_axis(axis(j, cfg.throttle_axis)?, cfg.deadzone, cfg.throttle_scale);
    Ok(VehicleControl::new(steering, throttle, j.stamp, 0))
}

/// Arrow-key state for the keyboard fallback.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct KeyState {
    pub up: bool,
    pub down: bool,
    pub left: bool,
    pub right: bool,
}

/// Synthetic joystick reading from held arrow keys: full deflection per key,
/// opposite keys cancel.
pub fn keys_to_joy(keys: KeyState, stamp: Timestamp) -> JoyState {
    let axis = |pos: bool, neg: bool| (pos as i8 - neg as i8) as f64;
    JoyState { axes: vec![axis(keys.left, keys.right), axis(keys.up, keys.down)], buttons: Vec::new(), stamp }
}

#[derive(Debug, Clone, PartialEq)]
pub enum JoyEvent {
    State(JoyState),
    Disconnected,
}

/// Latest-value cell between an input reader and the periodic publisher.
/// Writers replace the value; the reader takes it. Nothing queues up.
#[derive(Debug, Clone, Default)]
pub struct LatestJoy {
    cell: Arc<Mutex<Option<JoyEvent>>>,
}

impl LatestJoy {
    pub fn new() -> Self {
        LatestJoy::default()
    }

    pub fn put(&self, ev: JoyEvent) {
        *self.cell.lock().unwrap_or_else(|e| e.into_inner()) = Some(ev);
    }

    pub fn take(&self) -> Option<JoyEvent> {
        self.cell.lock().unwrap_or_else(|e| e.into_inner()).take()
    }
}

/// Zero-order hold of the last joystick reading, sampled at the publish rate.
#[derive(Debug, Clone)]
pub struct Teleop {
    cfg: TeleopConfig,
    latest: Option<JoyState>,
    last_input: Option<Timestamp>,
    next_due: u64,
    seq: u32,
}

impl Teleop {
    pub fn new(cfg: TeleopConfig) -> Result<Self, TeleopError> {
        cfg.validate()?;
        Ok(Teleop { cfg, latest: None, last_input: None, next_due: 0, seq: 0 })
    }

    pub fn config(&self) -> &TeleopConfig {
        &self.cfg
    }

    pub fn on_event(&mut self, ev: JoyEvent, now: Timestamp) {
        match ev {
            JoyEvent::State(j) => {
                self.latest = Some(j);
                self.last_input = Some(now);
            }
            JoyEvent::Disconnected => {
                if self.latest.is_some() {
                    warn!("joystick disconnected at t={:.3}; holding neutral", now.0);
                }
                self.latest = None;
                self.last_input = None;
            }
        }
    }

    /// Command the node would publish at `now`.
    pub fn current(&self, now: Timestamp) -> (f64, f64) {
        let fresh = self.last_input.is_some_and(|t| now.0 - t.0 <= SILENCE_TIMEOUT);
        match (&self.latest, fresh) {
            (Some(j), true) => match joy_to_vehicle(j, &self.cfg) {
                Ok(c) => (c.steering, c.throttle),
                Err(e) => {
                    warn!("ignoring joystick reading: {e}");
                    (0.0, 0.0)
                }
            },
            _ => (0.0, 0.0),
        }
    }

    /// Returns a command when one is due at `now`.
    pub fn poll(&mut self, now: Timestamp) -> Option<VehicleControl> {
        let period = self.cfg.publish_period();
        if now.0 + 1e-9 < self.next_due as f64 * period {
            return None;
        }
        self.next_due = (now.0 / period + 1e-9).floor() as u64 + 1;
        let (steering, throttle) = self.current(now);
        let cmd = VehicleControl::new(steering, throttle, now, self.seq);
        self.seq = self.seq.wrapping_add(1);
        Some(cmd)
    }
}

/// [`Teleop`] attached to the bus: reads `/joy`, publishes `/vehicle_control`.
#[derive(Debug)]
pub struct TeleopNode {
    joy: Subscription,
    out: Publisher,
    teleop: Teleop,
    node: NodeHandle,
}

impl TeleopNode {
    pub fn new(bus: &Bus, cfg: TeleopConfig, queue_depth: u16) -> Result<Self, TeleopError> {
        let teleop = Teleop::new(cfg)?;
        let node = bus.node(NODE_NAME)?;
        let joy = node.subscribe(topics::JOY, queue_depth)?;
        let out = node.advertise(TopicSpec::canonical(SchemaId::VehicleControl))?;
        info!("{NODE_NAME} up, publishing at {} Hz", teleop.cfg.publish_rate);
        Ok(TeleopNode { joy, out, teleop, node })
    }

    pub fn teleop(&self) -> &Teleop {
        &self.teleop
    }

    pub fn inject(&mut self, ev: JoyEvent, now: Timestamp) {
        self.teleop.on_event(ev, now);
    }

    /// Consumes pending `/joy` messages and publishes if a command is due.
    pub fn spin_once(&mut self, now: Timestamp) -> Result<Option<VehicleControl>, TeleopError> {
        for env in self.joy.drain() {
            if let Message::Joy(j) = &*env.msg {
                self.teleop.on_event(JoyEvent::State(j.clone()), now);
            }
        }
        match self.teleop.poll(now) {
            Some(cmd) => {
                self.out.publish(cmd)?;
                Ok(Some(cmd))
            }
            None => Ok(None),
        }
    }

    pub fn shutdown(self) {
        let TeleopNode { joy, out, node, .. } = self;
        drop((joy, out));
        node.shutdown();
    }
}
