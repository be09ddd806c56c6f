//! Little-endian binary layout for message payloads.
//!
//! Scalars: f64 as IEEE 754 binary64, i64/u64/u32/u16 two's complement, u8
//! and bool as one byte. Lists carry a u16 element count prefix. Fields are
//! written in declaration order with no padding.

use thiserror::Error;

use super::{
    CameraFrame, EncoderPulse, Heartbeat, ImuFrame, ImuSample, JoyState, LaserScan, Quaternion,
    SchemaId, Timestamp, Vector3, VehicleControl,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DecodeError {
    #[error("payload truncated: needed {needed} more bytes at offset {offset}")]
    Truncated { offset: usize, needed: usize },
    #[error("{0} trailing bytes after message")]
    TrailingBytes(usize),
    #[error("invalid value for field {0}")]
    InvalidField(&'static str),
}

pub struct Writer<'a> {
    out: &'a mut Vec<u8>,
}

impl<'a> Writer<'a> {
    pub fn new(out: &'a mut Vec<u8>) -> Self {
        Writer { out }
    }

    pub fn f64(&mut self, v: f64) {
        self.out.extend_from_slice(&v.to_le_bytes());
    }

    pub fn i64(&mut self, v: i64) {
        self.out.extend_from_slice(&v.to_le_bytes());
    }

    pub fn u64(&mut self, v: u64) {
        self.out.extend_from_slice(&v.to_le_bytes());
    }

    pub fn u32(&mut self, v: u32) {
        self.out.extend_from_slice(&v.to_le_bytes());
    }

    pub fn u16(&mut self, v: u16) {
        self.out.extend_from_slice(&v.to_le_bytes());
    }

    pub fn u8(&mut self, v: u8) {
        self.out.push(v);
    }

    pub fn stamp(&mut self, t: Timestamp) {
        self.f64(t.0);
    }

    pub fn vector3(&mut self, v: &Vector3) {
        self.f64(v.x);
        self.f64(v.y);
        self.f64(v.z);
    }

    /// Writes a u16 count followed by each element. Lists longer than
    /// `u16::MAX` are truncated; no schema in this crate comes close.
    fn list<T>(&mut self, items: &[T], mut each: impl FnMut(&mut Self, &T)) {
        let n = items.len().min(u16::MAX as usize);
        self.u16(n as u16);
        for item in &items[..n] {
            each(self, item);
        }
    }
}

pub struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Reader { buf, pos: 0 }
    }

    fn take<const N: usize>(&mut self) -> Result<[u8; N], DecodeError> {
        let end = self.pos + N;
        if end > self.buf.len() {
            return Err(DecodeError::Truncated { offset: self.pos, needed: end - self.buf.len() });
        }
        let mut b = [0u8; N];
        b.copy_from_slice(&self.buf[self.pos..end]);
        self.pos = end;
        Ok(b)
    }

    pub fn f64(&mut self) -> Result<f64, DecodeError> {
        self.take::<8>().map(f64::from_le_bytes)
    }

    pub fn i64(&mut self) -> Result<i64, DecodeError> {
        self.take::<8>().map(i64::from_le_bytes)
    }

    pub fn u64(&mut self) -> Result<u64, DecodeError> {
        self.take::<8>().map(u64::from_le_bytes)
    }

    pub fn u32(&mut self) -> Result<u32, DecodeError> {
        self.take::<4>().map(u32::from_le_bytes)
    }

    pub fn u16(&mut self) -> Result<u16, DecodeError> {
        self.take::<2>().map(u16::from_le_bytes)
    }

    pub fn u8(&mut self) -> Result<u8, DecodeError> {
        self.take::<1>().map(|b| b[0])
    }

    pub fn stamp(&mut self) -> Result<Timestamp, DecodeError> {
        self.f64().map(Timestamp)
    }

    pub fn vector3(&mut self) -> Result<Vector3, DecodeError> {
        Ok(Vector3 { x: self.f64()?, y: self.f64()?, z: self.f64()? })
    }

    fn list<T>(
        &mut self,
        mut each: impl FnMut(&mut Self) -> Result<T, DecodeError>,
    ) -> Result<Vec<T>, DecodeError> {
        let n = self.u16()? as usize;
        let mut out = Vec::with_capacity(n.min(self.buf.len()));
        for _ in 0..n {
            out.push(each(self)?);
        }
        Ok(out)
    }

    pub fn finish(self) -> Result<(), DecodeError> {
        match self.buf.len() - self.pos {
            0 => Ok(()),
            n => Err(DecodeError::TrailingBytes(n)),
        }
    }
}

/// A message with a fixed binary layout.
pub trait BinaryMessage: Sized {
    const SCHEMA: SchemaId;

    fn write(&self, w: &mut Writer<'_>);

    fn read(r: &mut Reader<'_>) -> Result<Self, DecodeError>;

    fn encode_into(&self, out: &mut Vec<u8>) {
        self.write(&mut Writer::new(out));
    }

    fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.encode_into(&mut out);
        out
    }

    /// Decodes a complete payload; leftover bytes are an error.
    fn decode(bytes: &[u8]) -> Result<Self, DecodeError> {
        let mut r = Reader::new(bytes);
        let m = Self::read(&mut r)?;
        r.finish()?;
        Ok(m)
    }
}

impl BinaryMessage for JoyState {
    const SCHEMA: SchemaId = SchemaId::Joy;

    fn write(&self, w: &mut Writer<'_>) {
        w.list(&self.axes, |w, a| w.f64(*a));
        w.list(&self.buttons, |w, b| w.u8(*b));
        w.stamp(self.stamp);
    }

    fn read(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        Ok(JoyState { axes: r.list(Reader::f64)?, buttons: r.list(Reader::u8)?, stamp: r.stamp()? })
    }
}

impl BinaryMessage for VehicleControl {
    const SCHEMA: SchemaId = SchemaId::VehicleControl;

    fn write(&self, w: &mut Writer<'_>) {
        w.f64(self.steering);
        w.f64(self.throttle);
        w.stamp(self.stamp);
        w.u32(self.seq);
    }

    fn read(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        Ok(VehicleControl { steering: r.f64()?, throttle: r.f64()?, stamp: r.stamp()?, seq: r.u32()? })
    }
}

impl BinaryMessage for EncoderPulse {
    const SCHEMA: SchemaId = SchemaId::EncoderPulse;

    fn write(&self, w: &mut Writer<'_>) {
        w.i64(self.drive_count);
        w.i64(self.steer_count);
        w.stamp(self.stamp);
        w.u32(self.seq);
    }

    fn read(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        Ok(EncoderPulse {
            drive_count: r.i64()?,
            steer_count: r.i64()?,
            stamp: r.stamp()?,
            seq: r.u32()?,
        })
    }
}

impl BinaryMessage for ImuSample {
    const SCHEMA: SchemaId = SchemaId::Imu;

    fn write(&self, w: &mut Writer<'_>) {
        w.vector3(&self.accel);
        w.vector3(&self.gyro);
        w.vector3(&self.mag);
        let q = &self.orientation;
        w.f64(q.w);
        w.f64(q.x);
        w.f64(q.y);
        w.f64(q.z);
        w.u8(match self.frame {
            ImuFrame::Razor => 0,
            ImuFrame::Rep103 => 1,
        });
        w.stamp(self.stamp);
    }

    fn read(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        let accel = r.vector3()?;
        let gyro = r.vector3()?;
        let mag = r.vector3()?;
        let orientation = Quaternion { w: r.f64()?, x: r.f64()?, y: r.f64()?, z: r.f64()? };
        let frame = match r.u8()? {
            0 => ImuFrame::Razor,
            1 => ImuFrame::Rep103,
            _ => return Err(DecodeError::InvalidField("frame")),
        };
        Ok(ImuSample { accel, gyro, mag, orientation, frame, stamp: r.stamp()? })
    }
}

impl BinaryMessage for LaserScan {
    const SCHEMA: SchemaId = SchemaId::LaserScan;

    fn write(&self, w: &mut Writer<'_>) {
        w.f64(self.angle_min);
        w.f64(self.angle_increment);
        w.list(&self.ranges, |w, r| w.f64(*r));
        w.f64(self.range_max);
        w.list(&self.valid, |w, v| w.u8(*v as u8));
        w.stamp(self.stamp);
    }

    fn read(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        let angle_min = r.f64()?;
        let angle_increment = r.f64()?;
        let ranges = r.list(Reader::f64)?;
        let range_max = r.f64()?;
        let valid = r.list(|r| match r.u8()? {
            0 => Ok(false),
            1 => Ok(true),
            _ => Err(DecodeError::InvalidField("valid")),
        })?;
        Ok(LaserScan { angle_min, angle_increment, ranges, range_max, valid, stamp: r.stamp()? })
    }
}

impl BinaryMessage for Heartbeat {
    const SCHEMA: SchemaId = SchemaId::Heartbeat;

    fn write(&self, w: &mut Writer<'_>) {
        w.u64(self.frames_ok);
        w.u64(self.frames_bad_checksum);
        w.u64(self.invalid_transitions);
        w.u64(self.clamp_events);
        w.u64(self.stale_events);
        w.u64(self.malformed);
        w.stamp(self.stamp);
        w.u32(self.seq);
    }

    fn read(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        Ok(Heartbeat {
            frames_ok: r.u64()?,
            frames_bad_checksum: r.u64()?,
            invalid_transitions: r.u64()?,
            clamp_events: r.u64()?,
            stale_events: r.u64()?,
            malformed: r.u64()?,
            stamp: r.stamp()?,
            seq: r.u32()?,
        })
    }
}

impl BinaryMessage for CameraFrame {
    const SCHEMA: SchemaId = SchemaId::CameraFrame;

    fn write(&self, w: &mut Writer<'_>) {
        w.u64(self.counter);
        w.stamp(self.stamp);
    }

    fn read(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        Ok(CameraFrame { counter: r.u64()?, stamp: r.stamp()? })
    }
}
