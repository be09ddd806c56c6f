use std::collections::VecDeque;

use super::{checksum, Frame, MAX_PAYLOAD, SYNC};

/// Where the decoder is within a frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecoderState {
    Sync1,
    Sync2,
    Len,
    LenCk,
    Topic,
    Payload,
    Ck,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DecoderStats {
    pub frames_ok: u64,
    pub frames_bad_checksum: u64,
    pub bytes_skipped: u64,
}

/// Incremental frame decoder with resynchronization.
///
/// Corruption never surfaces as an error. A failed header or trailer
/// discards the candidate frame and the bytes after its first sync byte are
/// scanned again, so a real frame hidden inside a false one is still found.
/// Output does not depend on how the input is chunked across calls.
#[derive(Debug, Clone)]
pub struct StreamDecoder {
    state: DecoderState,
    /// Bytes of the current candidate frame, starting at its 0xFF.
    cand: Vec<u8>,
    payload_len: usize,
    stats: DecoderStats,
}

impl Default for StreamDecoder {
    fn default() -> Self {
        StreamDecoder::new()
    }
}

impl StreamDecoder {
    pub fn new() -> Self {
        StreamDecoder {
            state: DecoderState::Sync1,
            cand: Vec::with_capacity(MAX_PAYLOAD + 8),
            payload_len: 0,
            stats: DecoderStats::default(),
        }
    }

    pub fn state(&self) -> DecoderState {
        self.state
    }

    pub fn stats(&self) -> DecoderStats {
        self.stats
    }

    /// Consumes `bytes` and returns every frame completed by them, in order.
    pub fn feed(&mut self, bytes: &[u8]) -> Vec<Frame> {
        let mut out = Vec::new();
        for &b in bytes {
            self.push(b, &mut out);
        }
        out
    }

    fn push(&mut self, b: u8, out: &mut Vec<Frame>) {
        let Some(replay) = self.step(b, out) else {
            return;
        };
        let mut pending: VecDeque<u8> = replay.into();
        while let Some(b) = pending.pop_front() {
            if let Some(again) = self.step(b, out) {
                for &r in again.iter().rev() {
                    pending.push_front(r);
                }
            }
        }
    }

    /// Advances by one byte. Returns bytes to rescan when the candidate
    /// frame was rejected.
    fn step(&mut self, b: u8, out: &mut Vec<Frame>) -> Option<Vec<u8>> {
        match self.state {
            DecoderState::Sync1 => {
                if b == SYNC[0] {
                    self.cand.clear();
                    self.cand.push(b);
                    self.state = DecoderState::Sync2;
                } else {
                    self.stats.bytes_skipped += 1;
                }
                None
            }
            DecoderState::Sync2 => {
                self.cand.push(b);
                if b == SYNC[1] {
                    self.state = DecoderState::Len;
                    None
                } else {
                    Some(self.reject())
                }
            }
            DecoderState::Len => {
                self.cand.push(b);
                if self.cand.len() == 4 {
                    self.state = DecoderState::LenCk;
                }
                None
            }
            DecoderState::LenCk => {
                self.cand.push(b);
                if checksum(&self.cand[2..4]) != b {
                    self.stats.frames_bad_checksum += 1;
                    return Some(self.reject());
                }
                let len = u16::from_le_bytes([self.cand[2], self.cand[3]]) as usize;
                if len > MAX_PAYLOAD {
                    return Some(self.reject());
                }
                self.payload_len = len;
                self.state = DecoderState::Topic;
                None
            }
            DecoderState::Topic => {
                self.cand.push(b);
                if self.cand.len() == 7 {
                    self.state =
                        if self.payload_len == 0 { DecoderState::Ck } else { DecoderState::Payload };
                }
                None
            }
            DecoderState::Payload => {
                self.cand.push(b);
                if self.cand.len() == 7 + self.payload_len {
                    self.state = DecoderState::Ck;
                }
                None
            }
            DecoderState::Ck => {
                self.cand.push(b);
                let body = &self.cand[5..7 + self.payload_len];
                if checksum(body) != b {
                    self.stats.frames_bad_checksum += 1;
                    return Some(self.reject());
                }
                let topic_id = u16::from_le_bytes([self.cand[5], self.cand[6]]);
                let payload = self.cand[7..7 + self.payload_len].to_vec();
                out.push(Frame { topic_id, payload });
                self.stats.frames_ok += 1;
                self.cand.clear();
                self.state = DecoderState::Sync1;
                None
            }
        }
    }

    /// Drops the candidate's leading sync byte and hands back the rest.
    fn reject(&mut self) -> Vec<u8> {
        self.stats.bytes_skipped += 1;
        self.state = DecoderState::Sync1;
        let rest = self.cand[1..].to_vec();
        self.cand.clear();
        rest
    }
}
