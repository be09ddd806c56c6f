//! Deterministic scheduler for the full node graph.
//!
//! One [`Sim::step`] is one firmware tick. Within a tick the order is fixed:
//! joystick input, teleop, host serial TX, firmware RX and tick, plant step,
//! host serial RX, sensors, recorder. Nothing reads the wall clock, so two
//! runs with the same config and script produce the same messages.

use std::collections::VecDeque;
use std::path::Path;

use log::{debug, info, warn};
use thiserror::Error;

use crate::bus::{Bus, BusError, NodeHandle, Publisher, Subscription, TopicSpec};
use crate::config::BringupConfig;
use crate::daq::{DaqError, Manifest, Recorder, RecordingConfig};
use crate::firmware::{ControlUnit, TickOutput};
use crate::msgs::{imu_to_rep103, topics, CameraFrame, JoyState, Message, SchemaId, Timestamp};
use crate::plant::{encoder_edges, load_world, sample_imu, scan_lidar, Plant, PlantError, VehicleState, WorldModel};
use crate::teleop::{JoyEvent, LatestJoy, TeleopError, TeleopNode};
use crate::wire::{BytePipe, StreamDecoder, TopicRegistry};

pub const JOY_NODE: &str = "joy";
pub const SERIAL_NODE: &str = "serial_node";
pub const LIDAR_NODE: &str = "lidar";
pub const IMU_NODE: &str = "imu";
pub const CAMERA_NODE: &str = "camera";

/// The joystick driver republishes the held state at this rate, like a
/// gamepad driver's autorepeat.
pub const JOY_AUTOREPEAT_HZ: f64 = 20.0;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("joy script line {line}: {reason}")]
    Script { line: usize, reason: String },
    #[error(transparent)]
    Plant(#[from] PlantError),
    #[error(transparent)]
    Teleop(#[from] TeleopError),
    #[error(transparent)]
    Daq(#[from] DaqError),
    #[error(transparent)]
    Bus(#[from] BusError),
}

/// Timed joystick events.
///
/// Text form, one event per line, `#` starts a comment:
///
/// ```text
/// 0.0   0.0 1.0     # t, then axes
/// 2.5   disconnect
/// ```
#[derive(Debug, Clone, Default, PartialEq)]
pub struct JoyScript {
    events: VecDeque<(f64, JoyEvent)>,
}

impl JoyScript {
    pub fn new() -> Self {
        JoyScript::default()
    }

    pub fn push(mut self, t: f64, axes: &[f64]) -> Self {
        let ev = JoyEvent::State(JoyState { axes: axes.to_vec(), buttons: Vec::new(), stamp: Timestamp(t) });
        self.insert(t, ev);
        self
    }

    pub fn disconnect(mut self, t: f64) -> Self {
        self.insert(t, JoyEvent::Disconnected);
        self
    }

    fn insert(&mut self, t: f64, ev: JoyEvent) {
        let at = self.events.partition_point(|(et, _)| *et <= t);
        self.events.insert(at, (t, ev));
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn parse(text: &str) -> Result<Self, SimError> {
        let mut script = JoyScript::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let bad = |reason: String| SimError::Script { line: i + 1, reason };
            let mut fields = line.split_whitespace();
            let t: f64 = fields
                .next()
                .and_then(|f| f.parse().ok())
                .filter(|t: &f64| t.is_finite() && *t >= 0.0)
                .ok_or_else(|| bad("expected a non-negative time".into()))?;
            let rest: Vec<&str> = fields.collect();
            if rest == ["disconnect"] {
                script.insert(t, JoyEvent::Disconnected);
                continue;
            }
            let axes = rest
                .iter()
                .map(|f| f.parse::<f64>().map_err(|_| bad(format!("bad axis value {f:?}"))))
                .collect::<Result<Vec<_>, _>>()?;
            if axes.is_empty() {
                return Err(bad("expected axes or `disconnect`".into()));
            }
            script = script.push(t, &axes);
        }
        Ok(script)
    }

    pub fn load(path: &Path) -> Result<Self, SimError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| SimError::Script { line: 0, reason: format!("{}: {e}", path.display()) })?;
        Self::parse(&text)
    }

    fn pop_due(&mut self, now: f64) -> Option<JoyEvent> {
        if self.events.front().is_some_and(|(t, _)| *t <= now + 1e-9) {
            self.events.pop_front().map(|(_, ev)| ev)
        } else {
            None
        }
    }
}

/// Host end of the serial link: bridges `/vehicle_control` onto the wire
/// and decoded frames back onto the bus.
#[derive(Debug)]
struct SerialNode {
    commands: Subscription,
    pulses: Publisher,
    heartbeats: Publisher,
    decoder: StreamDecoder,
    registry: TopicRegistry,
    _node: NodeHandle,
}

impl SerialNode {
    fn new(bus: &Bus, depth: u16) -> Result<Self, BusError> {
        let node = bus.node(SERIAL_NODE)?;
        Ok(SerialNode {
            commands: node.subscribe(topics::VEHICLE_CONTROL, depth)?,
            pulses: node.advertise(TopicSpec::canonical(SchemaId::EncoderPulse))?,
            heartbeats: node.advertise(TopicSpec::canonical(SchemaId::Heartbeat))?,
            decoder: StreamDecoder::new(),
            registry: TopicRegistry::standard(),
            _node: node,
        })
    }

    fn transmit(&self) -> Vec<u8> {
        let mut out = Vec::new();
        for env in self.commands.drain() {
            match self.registry.frame_for(&env.msg) {
                Ok(f) => f.encode_into(&mut out),
                Err(e) => warn!("{SERIAL_NODE}: cannot frame command: {e}"),
            }
        }
        out
    }

    fn receive(&mut self, bytes: &[u8]) -> Result<(), BusError> {
        for frame in self.decoder.feed(bytes) {
            match self.registry.message_from(&frame) {
                Ok(m @ Message::EncoderPulse(_)) => {
                    self.pulses.publish(m)?;
                }
                Ok(m @ Message::Heartbeat(_)) => {
                    self.heartbeats.publish(m)?;
                }
                Ok(other) => debug!("{SERIAL_NODE}: ignoring {:?} from control unit", other.schema()),
                Err(e) => warn!("{SERIAL_NODE}: {e}"),
            }
        }
        Ok(())
    }
}

#[derive(Debug)]
struct Sensor {
    period_ticks: u64,
    out: Publisher,
    _node: NodeHandle,
}

impl Sensor {
    fn new(bus: &Bus, name: &str, schema: SchemaId, rate_hz: f64, tick_hz: u32) -> Result<Self, BusError> {
        let node = bus.node(name)?;
        let out = node.advertise(TopicSpec::canonical(schema))?;
        let period_ticks = ((tick_hz as f64 / rate_hz).round() as u64).max(1);
        Ok(Sensor { period_ticks, out, _node: node })
    }

    fn due(&self, tick: u64) -> bool {
        tick.is_multiple_of(self.period_ticks)
    }
}

/// The assembled system on one bus.
#[derive(Debug)]
pub struct Sim {
    bus: Bus,
    tick: u64,
    tick_hz: u32,
    plant: Plant,
    firmware: ControlUnit,
    world: WorldModel,
    host_tx: BytePipe,
    mcu_tx: BytePipe,
    last_output: Option<TickOutput>,
    script: JoyScript,
    live: LatestJoy,
    joy: Publisher,
    joy_held: Option<JoyState>,
    joy_last_tick: u64,
    _joy_node: NodeHandle,
    teleop: Option<TeleopNode>,
    serial: SerialNode,
    lidar: Sensor,
    imu: Sensor,
    camera: Sensor,
    imu_prev: VehicleState,
    /// Shaft angles (steer, drive) up to which edges have reached the firmware.
    seen_shafts: (f64, f64),
    camera_frames: u64,
    recorder: Option<Recorder>,
}

impl Sim {
    /// Builds the standard graph. Recording starts immediately when the
    /// config has a `daq` section.
    pub fn new(cfg: &BringupConfig, script: JoyScript) -> Result<Self, SimError> {
        let world = match &cfg.world_file {
            Some(path) => load_world(path)?,
            None => WorldModel::default(),
        };
        Self::with_world(cfg, script, world)
    }

    pub fn with_world(cfg: &BringupConfig, script: JoyScript, world: WorldModel) -> Result<Self, SimError> {
        let bus = Bus::new();
        let plant = Plant::new(cfg.plant.clone())?;
        let tick_hz = cfg.firmware.tick_hz;
        let joy_node = bus.node(JOY_NODE)?;
        let joy = joy_node.advertise(TopicSpec::canonical(SchemaId::Joy))?;
        let teleop = TeleopNode::new(&bus, cfg.teleop.clone(), cfg.queue_depth)?;
        let serial = SerialNode::new(&bus, cfg.queue_depth)?;
        let lidar = Sensor::new(&bus, LIDAR_NODE, SchemaId::LaserScan, cfg.plant.lidar.rate_hz(), tick_hz)?;
        let imu = Sensor::new(&bus, IMU_NODE, SchemaId::Imu, cfg.plant.imu_rate_hz, tick_hz)?;
        let camera = Sensor::new(&bus, CAMERA_NODE, SchemaId::CameraFrame, cfg.plant.camera_rate_hz, tick_hz)?;
        let mut sim = Sim {
            tick: 0,
            tick_hz,
            imu_prev: *plant.state(),
            seen_shafts: (plant.state().steer_shaft_angle, plant.state().drive_shaft_angle),
            plant,
            firmware: ControlUnit::new(cfg.firmware),
            world,
            host_tx: BytePipe::new(cfg.link, cfg.seed),
            mcu_tx: BytePipe::new(cfg.link, cfg.seed.wrapping_add(1)),
            last_output: None,
            script,
            live: LatestJoy::new(),
            joy,
            joy_held: None,
            joy_last_tick: 0,
            _joy_node: joy_node,
            teleop: Some(teleop),
            serial,
            lidar,
            imu,
            camera,
            camera_frames: 0,
            recorder: None,
            bus,
        };
        if let Some(daq) = &cfg.daq {
            sim.start_recording(daq.clone())?;
        }
        info!("bringup complete: {} nodes", sim.bus.graph().nodes.len());
        Ok(sim)
    }

    pub fn bus(&self) -> &Bus {
        &self.bus
    }

    pub fn now(&self) -> Timestamp {
        Timestamp(self.tick as f64 / self.tick_hz as f64)
    }

    pub fn ticks(&self) -> u64 {
        self.tick
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.tick_hz as f64
    }

    pub fn plant(&self) -> &Plant {
        &self.plant
    }

    pub fn firmware(&self) -> &ControlUnit {
        &self.firmware
    }

    /// Duties applied to the plant on the last tick, (steer, drive).
    pub fn pwm(&self) -> (f64, f64) {
        self.last_output.as_ref().map_or((0.0, 0.0), |o| (o.steer.duty, o.drive.duty))
    }

    /// Handle for live joystick input from another thread.
    pub fn joy_input(&self) -> LatestJoy {
        self.live.clone()
    }

    /// Shuts down `joy2vehicle`, so `/vehicle_control` goes silent.
    pub fn halt_teleop(&mut self) {
        if let Some(t) = self.teleop.take() {
            info!("{} halted at t={:.3}", crate::teleop::NODE_NAME, self.now().0);
            t.shutdown();
        }
    }

    pub fn is_recording(&self) -> bool {
        self.recorder.as_ref().is_some_and(Recorder::is_recording)
    }

    pub fn start_recording(&mut self, cfg: RecordingConfig) -> Result<(), SimError> {
        if self.recorder.is_none() {
            self.recorder = Some(Recorder::start(&self.bus, cfg, self.now())?);
        }
        Ok(())
    }

    pub fn stop_recording(&mut self) -> Result<Option<Manifest>, SimError> {
        match self.recorder.take() {
            Some(r) => Ok(Some(r.stop(self.now())?)),
            None => Ok(None),
        }
    }

    /// Advances one tick.
    pub fn step(&mut self) -> Result<(), SimError> {
        self.tick += 1;
        let now = self.now();
        let dt = self.dt();

        while let Some(ev) = self.script.pop_due(now.0) {
            self.deliver_joy(ev, now)?;
        }
        if let Some(ev) = self.live.take() {
            self.deliver_joy(ev, now)?;
        }
        let repeat_ticks = (self.tick_hz as f64 / JOY_AUTOREPEAT_HZ).round() as u64;
        if self.tick - self.joy_last_tick >= repeat_ticks {
            if let Some(held) = self.joy_held.clone() {
                self.deliver_joy(JoyEvent::State(held), now)?;
            }
        }
        if let Some(t) = self.teleop.as_mut() {
            t.spin_once(now)?;
        }

        let frames = self.serial.transmit();
        self.host_tx.write(now.0, &frames);
        let rx = self.host_tx.read(now.0);
        self.firmware.receive(&rx, now);

        let before = *self.plant.state();
        let ppr = self.plant.config().encoder_ppr;
        let (seen_steer, seen_drive) = self.seen_shafts;
        let steer_edges = encoder_edges(seen_steer, before.steer_shaft_angle, ppr);
        let drive_edges = encoder_edges(seen_drive, before.drive_shaft_angle, ppr);
        self.seen_shafts = (before.steer_shaft_angle, before.drive_shaft_angle);
        let out = self.firmware.tick(&steer_edges, &drive_edges, now);
        self.mcu_tx.write(now.0, &out.encoded_frames());
        self.plant.step(out.steer.duty, out.drive.duty, dt, now)?;
        self.last_output = Some(out);

        let rx = self.mcu_tx.read(now.0);
        self.serial.receive(&rx)?;

        self.emit_sensors(now)?;

        if let Some(rec) = self.recorder.as_mut() {
            rec.spin_once(now)?;
        }
        Ok(())
    }

    fn deliver_joy(&mut self, ev: JoyEvent, now: Timestamp) -> Result<(), SimError> {
        match ev {
            JoyEvent::State(mut j) => {
                j.stamp = now;
                self.joy.publish(j.clone())?;
                self.joy_held = Some(j);
                self.joy_last_tick = self.tick;
            }
            JoyEvent::Disconnected => {
                self.joy_held = None;
                if let Some(t) = self.teleop.as_mut() {
                    t.inject(JoyEvent::Disconnected, now);
                }
            }
        }
        Ok(())
    }

    fn emit_sensors(&mut self, now: Timestamp) -> Result<(), SimError> {
        let state = *self.plant.state();
        if self.imu.due(self.tick) {
            let dt = self.imu.period_ticks as f64 * self.dt();
            let raw = sample_imu(&self.imu_prev, &state, dt);
            // sample_imu always yields a Razor-frame reading
            let sample = imu_to_rep103(raw).expect("razor sample converts");
            self.imu.out.publish(sample)?;
            self.imu_prev = state;
        }
        if self.lidar.due(self.tick) {
            let scan = scan_lidar(&self.world, state.pose(), &self.plant.config().lidar, now);
            self.lidar.out.publish(scan)?;
        }
        if self.camera.due(self.tick) {
            self.camera.out.publish(CameraFrame { counter: self.camera_frames, stamp: now })?;
            self.camera_frames += 1;
        }
        Ok(())
    }

    /// Steps until the clock reaches `t` seconds.
    pub fn run_until(&mut self, t: f64) -> Result<(), SimError> {
        let target = (t * self.tick_hz as f64).round() as u64;
        while self.tick < target {
            self.step()?;
        }
        Ok(())
    }

    /// Stops any recording and removes every node from the bus.
    pub fn shutdown(mut self) -> Result<Option<Manifest>, SimError> {
        let manifest = self.stop_recording()?;
        let bus = self.bus.clone();
        drop(self);
        debug!("shutdown: {} nodes left", bus.graph().nodes.len());
        Ok(manifest)
    }
}
