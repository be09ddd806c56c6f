//! Framing codec for the control-unit to host serial link.
//!
//! ```text
//! 0xFF 0xFE | len: u16 LE | ck(len) | topic: u16 LE | payload[len] | ck(topic ++ payload)
//! ```
//!
//! `ck(bytes) = 255 - (sum(bytes) mod 256)`. A frame is `8 + len` bytes long
//! and `len` never exceeds [`MAX_PAYLOAD`]. See `docs/protocol.md`.

mod decoder;
mod pipe;

pub use decoder::{DecoderState, DecoderStats, StreamDecoder};
pub use pipe::{BytePipe, PipeConfig};

use thiserror::Error;

use crate::msgs::{topics, DecodeError, Message, SchemaId};

pub const SYNC: [u8; 2] = [0xFF, 0xFE];
pub const MAX_PAYLOAD: usize = 1024;
/// Bytes in a frame besides the payload.
pub const FRAME_OVERHEAD: usize = 8;

#[derive(Debug, Error, PartialEq)]
pub enum WireError {
    #[error("payload of {0} bytes exceeds the {MAX_PAYLOAD} byte limit")]
    PayloadTooLarge(usize),
    #[error("topic id {0} is not registered")]
    UnknownTopic(u16),
    #[error("schema {0:?} is not carried on the serial link")]
    UnregisteredSchema(SchemaId),
    #[error("failed to decode {topic} payload: {source}")]
    Decode {
        topic: String,
        #[source]
        source: DecodeError,
    },
}

/// Complement checksum over a byte slice.
pub fn checksum(bytes: &[u8]) -> u8 {
    checksum_of(bytes)
}

fn checksum_of<'a>(bytes: impl IntoIterator<Item = &'a u8>) -> u8 {
    255 - bytes.into_iter().fold(0u8, |acc, b| acc.wrapping_add(*b))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    topic_id: u16,
    payload: Vec<u8>,
}

impl Frame {
    pub fn new(topic_id: u16, payload: Vec<u8>) -> Result<Frame, WireError> {
        if payload.len() > MAX_PAYLOAD {
            return Err(WireError::PayloadTooLarge(payload.len()));
        }
        Ok(Frame { topic_id, payload })
    }

    pub fn topic_id(&self) -> u16 {
        self.topic_id
    }

    pub fn payload(&self) -> &[u8] {
        &self.payload
    }

    pub fn into_payload(self) -> Vec<u8> {
        self.payload
    }

    pub fn encoded_len(&self) -> usize {
        FRAME_OVERHEAD + self.payload.len()
    }

    /// Appends the wire bytes of this frame to `out`.
    pub fn encode_into(&self, out: &mut Vec<u8>) {
        let len = (self.payload.len() as u16).to_le_bytes();
        let topic = self.topic_id.to_le_bytes();
        out.reserve(self.encoded_len());
        out.extend_from_slice(&SYNC);
        out.extend_from_slice(&len);
        out.push(checksum(&len));
        out.extend_from_slice(&topic);
        out.extend_from_slice(&self.payload);
        out.push(checksum_of(topic.iter().chain(&self.payload)));
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.encoded_len());
        self.encode_into(&mut out);
        out
    }
}

/// Builds a frame and encodes it in one step.
pub fn encode_frame(topic_id: u16, payload: &[u8]) -> Result<Vec<u8>, WireError> {
    Ok(Frame::new(topic_id, payload.to_vec())?.encode())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TopicEntry {
    pub id: u16,
    pub name: &'static str,
    pub schema: SchemaId,
}

/// Topic ids used on the serial link. Ids are stable for a session and the
/// id-to-name mapping is one-to-one.
#[derive(Debug, Clone)]
pub struct TopicRegistry {
    entries: Vec<TopicEntry>,
}

impl Default for TopicRegistry {
    fn default() -> Self {
        TopicRegistry::standard()
    }
}

impl TopicRegistry {
    pub fn standard() -> Self {
        let entries = [
            (1, topics::VEHICLE_CONTROL, SchemaId::VehicleControl),
            (2, topics::ENCODER_PULSE, SchemaId::EncoderPulse),
            (3, topics::IMU, SchemaId::Imu),
            (4, topics::SCAN, SchemaId::LaserScan),
            (5, topics::HEARTBEAT, SchemaId::Heartbeat),
        ]
        .into_iter()
        .map(|(id, name, schema)| TopicEntry { id, name, schema })
        .collect();
        TopicRegistry { entries }
    }

    pub fn entries(&self) -> &[TopicEntry] {
        &self.entries
    }

    pub fn by_id(&self, id: u16) -> Option<&TopicEntry> {
        self.entries.iter().find(|e| e.id == id)
    }

    pub fn by_name(&self, name: &str) -> Option<&TopicEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    pub fn by_schema(&self, schema: SchemaId) -> Option<&TopicEntry> {
        self.entries.iter().find(|e| e.schema == schema)
    }

    /// Serializes `msg` into a frame on its registered topic.
    pub fn frame_for(&self, msg: &Message) -> Result<Frame, WireError> {
        let entry = self
            .by_schema(msg.schema())
            .ok_or(WireError::UnregisteredSchema(msg.schema()))?;
        Frame::new(entry.id, serialize(msg))
    }

    /// Decodes the message carried by `frame`.
    pub fn message_from(&self, frame: &Frame) -> Result<Message, WireError> {
        let entry = self.by_id(frame.topic_id()).ok_or(WireError::UnknownTopic(frame.topic_id()))?;
        deserialize(frame.payload(), entry.schema)
    }
}

/// Payload bytes for a message, in the shared binary layout.
pub fn serialize(msg: &Message) -> Vec<u8> {
    msg.to_bytes()
}

/// Decodes a payload of the given schema. Nothing is returned on error.
pub fn deserialize(payload: &[u8], schema: SchemaId) -> Result<Message, WireError> {
    Message::from_bytes(schema, payload).map_err(|source| WireError::Decode {
        topic: schema.canonical_topic().to_string(),
        source,
    })
}
