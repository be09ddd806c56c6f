//! Attitude conversions and IMU frame remapping.
//!
//! Euler angles use the intrinsic Z-Y-X order: yaw about z, then pitch about
//! the new y, then roll about the new x.

use super::{EulerAngles, ImuFrame, ImuSample, MsgError, Quaternion, Vector3};

/// Below this value of cos(pitch) the decomposition is treated as gimbal lock.
const GIMBAL_LOCK_COS: f64 = 1e-9;

pub fn euler_to_quaternion(e: EulerAngles) -> Result<Quaternion, MsgError> {
    if !(e.roll.is_finite() && e.pitch.is_finite() && e.yaw.is_finite()) {
        return Err(MsgError::InvalidArgument(format!("non-finite euler angles {e:?}")));
    }
    let (sr, cr) = (e.roll * 0.5).sin_cos();
    let (sp, cp) = (e.pitch * 0.5).sin_cos();
    let (sy, cy) = (e.yaw * 0.5).sin_cos();
    let q = Quaternion {
        w: cr * cp * cy + sr * sp * sy,
        x: sr * cp * cy - cr * sp * sy,
        y: cr * sp * cy + sr * cp * sy,
        z: cr * cp * sy - sr * sp * cy,
    };
    let n = q.norm();
    Ok(Quaternion { w: q.w / n, x: q.x / n, y: q.y / n, z: q.z / n })
}

/// Inverse of [`euler_to_quaternion`]. Pitch lands in [-π/2, π/2]; at gimbal
/// lock roll is set to zero and the whole rotation about z goes into yaw.
pub fn quaternion_to_euler(q: Quaternion) -> Result<EulerAngles, MsgError> {
    let n = q.norm();
    if !n.is_finite() || (n - 1.0).abs() >= 1e-6 {
        return Err(MsgError::InvalidArgument(format!("quaternion norm {n} is not unit")));
    }
    let (w, x, y, z) = (q.w / n, q.x / n, q.y / n, q.z / n);

    let r00 = 1.0 - 2.0 * (y * y + z * z);
    let r10 = 2.0 * (x * y + w * z);
    let r20 = 2.0 * (x * z - w * y);
    let cos_pitch = r00.hypot(r10);

    if cos_pitch < GIMBAL_LOCK_COS {
        let pitch = if r20 < 0.0 { std::f64::consts::FRAC_PI_2 } else { -std::f64::consts::FRAC_PI_2 };
        let r01 = 2.0 * (x * y - w * z);
        let r11 = 1.0 - 2.0 * (x * x + z * z);
        return Ok(EulerAngles { roll: 0.0, pitch, yaw: (-r01).atan2(r11) });
    }

    let r21 = 2.0 * (y * z + w * x);
    let r22 = 1.0 - 2.0 * (x * x + y * y);
    Ok(EulerAngles {
        roll: r21.atan2(r22),
        pitch: (-r20).atan2(cos_pitch),
        yaw: r10.atan2(r00),
    })
}

/// Razor axes (x forward, y right, z down) to REP-103 (x forward, y left,
/// z up). The mapping is its own inverse.
pub fn remap_razor_to_rep103(v: Vector3) -> Vector3 {
    Vector3 { x: v.x, y: -v.y, z: -v.z }
}

/// Converts a Razor-frame sample to REP-103.
///
/// The frame change is a half turn about x, so the orientation is conjugated
/// by that rotation: the scalar and x parts are kept, y and z flip sign.
pub fn imu_to_rep103(s: ImuSample) -> Result<ImuSample, MsgError> {
    if s.frame != ImuFrame::Razor {
        return Err(MsgError::InvalidState("sample is already in the REP-103 frame".into()));
    }
    let q = s.orientation;
    Ok(ImuSample {
        accel: remap_razor_to_rep103(s.accel),
        gyro: remap_razor_to_rep103(s.gyro),
        mag: remap_razor_to_rep103(s.mag),
        orientation: Quaternion { w: q.w, x: q.x, y: -q.y, z: -q.z },
        frame: ImuFrame::Rep103,
        stamp: s.stamp,
    })
}
