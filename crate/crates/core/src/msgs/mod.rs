//! Message schemas shared by every node in the graph.
//!
//! All messages are plain value types. Their binary layout (see [`codec`]) is
//! little-endian in declared field order and is the payload format carried by
//! the serial link and stored by the recorder.

pub mod codec;
pub mod rotation;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use codec::{BinaryMessage, DecodeError};
pub use rotation::{euler_to_quaternion, imu_to_rep103, quaternion_to_euler, remap_razor_to_rep103};

/// Number of beams in one LIDAR revolution.
pub const SCAN_BEAMS: usize = 360;

#[derive(Debug, Error, PartialEq)]
pub enum MsgError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid state: {0}")]
    InvalidState(String),
}

/// Seconds since the simulation epoch.
#[derive(Debug, Clone, Copy, Default, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Timestamp(pub f64);

impl Timestamp {
    pub const ZERO: Timestamp = Timestamp(0.0);

    pub fn secs(self) -> f64 {
        self.0
    }
}

/// Schema identifiers. The first five double as serial-link topic ids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[repr(u16)]
pub enum SchemaId {
    VehicleControl = 1,
    EncoderPulse = 2,
    Imu = 3,
    LaserScan = 4,
    Heartbeat = 5,
    Joy = 6,
    CameraFrame = 7,
}

impl SchemaId {
    pub const ALL: [SchemaId; 7] = [
        SchemaId::VehicleControl,
        SchemaId::EncoderPulse,
        SchemaId::Imu,
        SchemaId::LaserScan,
        SchemaId::Heartbeat,
        SchemaId::Joy,
        SchemaId::CameraFrame,
    ];

    pub fn from_u16(id: u16) -> Option<SchemaId> {
        SchemaId::ALL.into_iter().find(|s| *s as u16 == id)
    }

    /// Topic name this schema is published on in the standard graph.
    pub fn canonical_topic(self) -> &'static str {
        match self {
            SchemaId::VehicleControl => topics::VEHICLE_CONTROL,
            SchemaId::EncoderPulse => topics::ENCODER_PULSE,
            SchemaId::Imu => topics::IMU,
            SchemaId::LaserScan => topics::SCAN,
            SchemaId::Heartbeat => topics::HEARTBEAT,
            SchemaId::Joy => topics::JOY,
            SchemaId::CameraFrame => topics::CAMERA_STUB,
        }
    }
}

/// Canonical topic names.
pub mod topics {
    pub const JOY: &str = "/joy";
    pub const VEHICLE_CONTROL: &str = "/vehicle_control";
    pub const ENCODER_PULSE: &str = "/encoder_pulse";
    pub const IMU: &str = "/imu";
    pub const SCAN: &str = "/scan";
    pub const CAMERA_STUB: &str = "/camera_stub";
    pub const HEARTBEAT: &str = "/heartbeat";
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JoyState {
    /// Index 0 is the steering axis, index 1 the throttle axis.
    pub axes: Vec<f64>,
    pub buttons: Vec<u8>,
    pub stamp: Timestamp,
}

impl JoyState {
    pub fn neutral(stamp: Timestamp) -> Self {
        JoyState { axes: vec![0.0, 0.0], buttons: Vec::new(), stamp }
    }
}

/// Normalized drive-by-wire command. `steering` +1 is full left, `throttle`
/// +1 is full forward.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleControl {
    pub steering: f64,
    pub throttle: f64,
    pub stamp: Timestamp,
    pub seq: u32,
}

impl VehicleControl {
    /// Builds a command with both fields clamped to [-1, 1].
    pub fn new(steering: f64, throttle: f64, stamp: Timestamp, seq: u32) -> Self {
        VehicleControl {
            steering: steering.clamp(-1.0, 1.0),
            throttle: throttle.clamp(-1.0, 1.0),
            stamp,
            seq,
        }
    }
}

/// Cumulative 4x quadrature counts of the drive and steering encoder shafts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EncoderPulse {
    pub drive_count: i64,
    pub steer_count: i64,
    pub stamp: Timestamp,
    pub seq: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EulerAngles {
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
}

impl EulerAngles {
    pub fn new(roll: f64, pitch: f64, yaw: f64) -> Self {
        EulerAngles { roll, pitch, yaw }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quaternion {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Quaternion {
    pub const IDENTITY: Quaternion = Quaternion { w: 1.0, x: 0.0, y: 0.0, z: 0.0 };

    pub fn new(w: f64, x: f64, y: f64, z: f64) -> Self {
        Quaternion { w, x, y, z }
    }

    pub fn norm(&self) -> f64 {
        (self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Vector3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vector3 {
    pub const ZERO: Vector3 = Vector3 { x: 0.0, y: 0.0, z: 0.0 };

    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Vector3 { x, y, z }
    }

    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }
}

/// IMU axis convention.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ImuFrame {
    /// x forward, y right, z down.
    Razor,
    /// x forward, y left, z up.
    Rep103,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImuSample {
    pub accel: Vector3,
    pub gyro: Vector3,
    pub mag: Vector3,
    pub orientation: Quaternion,
    pub frame: ImuFrame,
    pub stamp: Timestamp,
}

/// One LIDAR revolution. Invalid beams carry range 0.0 and `valid == false`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaserScan {
    pub angle_min: f64,
    pub angle_increment: f64,
    pub ranges: Vec<f64>,
    pub range_max: f64,
    pub valid: Vec<bool>,
    pub stamp: Timestamp,
}

impl LaserScan {
    pub fn empty(range_max: f64, stamp: Timestamp) -> Self {
        LaserScan {
            angle_min: 0.0,
            angle_increment: std::f64::consts::TAU / SCAN_BEAMS as f64,
            ranges: vec![0.0; SCAN_BEAMS],
            range_max,
            valid: vec![false; SCAN_BEAMS],
            stamp,
        }
    }
}

/// Control-unit health counters, published once per second.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Heartbeat {
    pub frames_ok: u64,
    pub frames_bad_checksum: u64,
    pub invalid_transitions: u64,
    pub clamp_events: u64,
    pub stale_events: u64,
    pub malformed: u64,
    pub stamp: Timestamp,
    pub seq: u32,
}

/// Placeholder camera frame: no pixels, only stamp and frame counter.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CameraFrame {
    pub counter: u64,
    pub stamp: Timestamp,
}

/// Any message that can travel on the bus.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Message {
    Joy(JoyState),
    VehicleControl(VehicleControl),
    EncoderPulse(EncoderPulse),
    Imu(ImuSample),
    Scan(LaserScan),
    Heartbeat(Heartbeat),
    Camera(CameraFrame),
}

impl Message {
    pub fn schema(&self) -> SchemaId {
        match self {
            Message::Joy(_) => SchemaId::Joy,
            Message::VehicleControl(_) => SchemaId::VehicleControl,
            Message::EncoderPulse(_) => SchemaId::EncoderPulse,
            Message::Imu(_) => SchemaId::Imu,
            Message::Scan(_) => SchemaId::LaserScan,
            Message::Heartbeat(_) => SchemaId::Heartbeat,
            Message::Camera(_) => SchemaId::CameraFrame,
        }
    }

    pub fn stamp(&self) -> Timestamp {
        match self {
            Message::Joy(m) => m.stamp,
            Message::VehicleControl(m) => m.stamp,
            Message::EncoderPulse(m) => m.stamp,
            Message::Imu(m) => m.stamp,
            Message::Scan(m) => m.stamp,
            Message::Heartbeat(m) => m.stamp,
            Message::Camera(m) => m.stamp,
        }
    }

    /// Binary payload in the shared little-endian layout.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        match self {
            Message::Joy(m) => m.encode_into(&mut out),
            Message::VehicleControl(m) => m.encode_into(&mut out),
            Message::EncoderPulse(m) => m.encode_into(&mut out),
            Message::Imu(m) => m.encode_into(&mut out),
            Message::Scan(m) => m.encode_into(&mut out),
            Message::Heartbeat(m) => m.encode_into(&mut out),
            Message::Camera(m) => m.encode_into(&mut out),
        }
        out
    }

    pub fn from_bytes(schema: SchemaId, bytes: &[u8]) -> Result<Message, DecodeError> {
        Ok(match schema {
            SchemaId::Joy => Message::Joy(JoyState::decode(bytes)?),
            SchemaId::VehicleControl => Message::VehicleControl(VehicleControl::decode(bytes)?),
            SchemaId::EncoderPulse => Message::EncoderPulse(EncoderPulse::decode(bytes)?),
            SchemaId::Imu => Message::Imu(ImuSample::decode(bytes)?),
            SchemaId::LaserScan => Message::Scan(LaserScan::decode(bytes)?),
            SchemaId::Heartbeat => Message::Heartbeat(Heartbeat::decode(bytes)?),
            SchemaId::CameraFrame => Message::Camera(CameraFrame::decode(bytes)?),
        })
    }
}

macro_rules! impl_from_msg {
    ($($variant:ident($ty:ty)),* $(,)?) => {
        $(impl From<$ty> for Message {
            fn from(m: $ty) -> Message {
                Message::$variant(m)
            }
        })*
    };
}

impl_from_msg!(
    Joy(JoyState),
    VehicleControl(VehicleControl),
    EncoderPulse(EncoderPulse),
    Imu(ImuSample),
    Scan(LaserScan),
    Heartbeat(Heartbeat),
    Camera(CameraFrame),
);
