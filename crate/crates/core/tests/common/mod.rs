//! Reference implementations used as test oracles. None of them call into
//! the library code they check.
#![allow(dead_code)]

use std::f64::consts::TAU;

use rand::Rng;

use mir_core::msgs::{
    CameraFrame, EncoderPulse, Heartbeat, ImuFrame, ImuSample, JoyState, LaserScan, Message, Quaternion,
    Timestamp, Vector3, VehicleControl, SCAN_BEAMS,
};
use mir_core::plant::Segment;

// ---- framing ----

pub fn checksum(bytes: &[u8]) -> u8 {
    let sum: u32 = bytes.iter().map(|&b| b as u32).sum();
    (255 - sum % 256) as u8
}

pub fn frame_bytes(topic: u16, payload: &[u8]) -> Vec<u8> {
    let len = (payload.len() as u16).to_le_bytes();
    let topic = topic.to_le_bytes();
    let mut out = vec![0xFF, 0xFE, len[0], len[1], checksum(&len), topic[0], topic[1]];
    out.extend_from_slice(payload);
    let mut covered = topic.to_vec();
    covered.extend_from_slice(payload);
    out.push(checksum(&covered));
    out
}

// ---- quadrature ----

/// Channel levels (a, b) at absolute count position `n`.
pub fn gray(n: i64) -> (bool, bool) {
    match n.rem_euclid(4) {
        0 => (false, false),
        1 => (false, true),
        2 => (true, true),
        _ => (true, false),
    }
}

/// Signed step between two channel states: +1, -1, 0, or None for a double
/// transition.
pub fn gray_step(prev: (bool, bool), curr: (bool, bool)) -> Option<i64> {
    let index = |p: (bool, bool)| (0..4).find(|&k| gray(k) == p).unwrap();
    match (index(curr) - index(prev)).rem_euclid(4) {
        0 => Some(0),
        1 => Some(1),
        3 => Some(-1),
        _ => None,
    }
}

/// Count position of a shaft angle with 4x decoding, by direct arithmetic.
pub fn angle_to_counts(angle: f64, ppr: u32) -> f64 {
    angle / TAU * 4.0 * ppr as f64
}

/// Walks a shaft-angle trajectory in fine sub-steps and decodes every phase
/// change with the Gray table.
pub fn enumerate_edges(angles: &[f64], ppr: u32, substeps: usize) -> i64 {
    let phase = |a: f64| gray(angle_to_counts(a, ppr).floor() as i64);
    let mut count = 0;
    let mut prev = phase(angles[0]);
    for w in angles.windows(2) {
        for k in 1..=substeps {
            let a = w[0] + (w[1] - w[0]) * k as f64 / substeps as f64;
            let curr = phase(a);
            count += gray_step(prev, curr).expect("substeps fine enough for single edges");
            prev = curr;
        }
    }
    count
}

// ---- geometry ----

fn side(s: &Segment, x: f64, y: f64) -> f64 {
    (s.x2 - s.x1) * (y - s.y1) - (s.y2 - s.y1) * (x - s.x1)
}

/// Range along a ray by marching `samples` points out to `range_max`,
/// detecting a change of side against each segment's line, then bisecting.
pub fn march_ray(segments: &[Segment], ox: f64, oy: f64, angle: f64, range_max: f64, samples: usize) -> Option<f64> {
    let (dx, dy) = (angle.cos(), angle.sin());
    let at = |d: f64| (ox + dx * d, oy + dy * d);
    let mut best: Option<f64> = None;
    for s in segments {
        let f = |d: f64| {
            let (x, y) = at(d);
            side(s, x, y)
        };
        for k in 0..samples {
            let (mut lo, mut hi) = (range_max * k as f64 / samples as f64, range_max * (k + 1) as f64 / samples as f64);
            let (flo, fhi) = (f(lo), f(hi));
            if flo == 0.0 || flo.signum() == fhi.signum() {
                continue;
            }
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                if f(mid).signum() == flo.signum() {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let d = 0.5 * (lo + hi);
            let (x, y) = at(d);
            let (ex, ey) = (s.x2 - s.x1, s.y2 - s.y1);
            let u = ((x - s.x1) * ex + (y - s.y1) * ey) / (ex * ex + ey * ey);
            if (0.0..=1.0).contains(&u) {
                best = Some(best.map_or(d, |b: f64| b.min(d)));
            }
            break;
        }
    }
    best
}

// ---- rotations ----

pub type Mat3 = [[f64; 3]; 3];

pub fn mat_mul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut m = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            m[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    m
}

/// Rz(yaw) * Ry(pitch) * Rx(roll).
pub fn euler_matrix(roll: f64, pitch: f64, yaw: f64) -> Mat3 {
    let (sr, cr) = roll.sin_cos();
    let (sp, cp) = pitch.sin_cos();
    let (sy, cy) = yaw.sin_cos();
    let rx = [[1.0, 0.0, 0.0], [0.0, cr, -sr], [0.0, sr, cr]];
    let ry = [[cp, 0.0, sp], [0.0, 1.0, 0.0], [-sp, 0.0, cp]];
    let rz = [[cy, -sy, 0.0], [sy, cy, 0.0], [0.0, 0.0, 1.0]];
    mat_mul(&rz, &mat_mul(&ry, &rx))
}

pub fn quat_matrix(q: Quaternion) -> Mat3 {
    let Quaternion { w, x, y, z } = q;
    [
        [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
        [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)],
        [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)],
    ]
}

pub fn mat_max_diff(a: &Mat3, b: &Mat3) -> f64 {
    (0..9).map(|k| (a[k / 3][k % 3] - b[k / 3][k % 3]).abs()).fold(0.0, f64::max)
}

// ---- random messages ----

fn stamp(rng: &mut impl Rng) -> Timestamp {
    Timestamp(rng.gen_range(0.0..1e5))
}

fn v3(rng: &mut impl Rng) -> Vector3 {
    Vector3::new(rng.gen_range(-50.0..50.0), rng.gen_range(-50.0..50.0), rng.gen_range(-50.0..50.0))
}

/// Any message; `small` leaves out LaserScan, which exceeds one frame.
pub fn random_message(rng: &mut impl Rng, small: bool) -> Message {
    let pick = rng.gen_range(0..if small { 6 } else { 7 });
    match pick {
        0 => VehicleControl::new(rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0), stamp(rng), rng.gen()).into(),
        1 => EncoderPulse { drive_count: rng.gen(), steer_count: rng.gen(), stamp: stamp(rng), seq: rng.gen() }.into(),
        2 => ImuSample {
            accel: v3(rng),
            gyro: v3(rng),
            mag: v3(rng),
            orientation: Quaternion::new(rng.gen(), rng.gen(), rng.gen(), rng.gen()),
            frame: if rng.gen() { ImuFrame::Razor } else { ImuFrame::Rep103 },
            stamp: stamp(rng),
        }
        .into(),
        3 => Heartbeat {
            frames_ok: rng.gen(),
            frames_bad_checksum: rng.gen(),
            invalid_transitions: rng.gen(),
            clamp_events: rng.gen(),
            stale_events: rng.gen(),
            malformed: rng.gen(),
            stamp: stamp(rng),
            seq: rng.gen(),
        }
        .into(),
        4 => {
            let n = rng.gen_range(0..8);
            JoyState {
                axes: (0..n).map(|_| rng.gen_range(-1.0..=1.0)).collect(),
                buttons: (0..rng.gen_range(0..12)).map(|_| rng.gen_range(0..2)).collect(),
                stamp: stamp(rng),
            }
            .into()
        }
        5 => CameraFrame { counter: rng.gen(), stamp: stamp(rng) }.into(),
        _ => {
            let mut scan = LaserScan::empty(5.0, stamp(rng));
            for i in 0..SCAN_BEAMS {
                if rng.gen_bool(0.5) {
                    scan.ranges[i] = rng.gen_range(0.0..5.0);
                    scan.valid[i] = true;
                }
            }
            scan.into()
        }
    }
}

pub fn random_segment(rng: &mut impl Rng, extent: f64) -> Segment {
    let mut c = || rng.gen_range(-extent..extent);
    Segment::new(c(), c(), c(), c())
}
