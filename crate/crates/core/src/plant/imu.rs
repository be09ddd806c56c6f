use crate::msgs::{euler_to_quaternion, EulerAngles, ImuFrame, ImuSample, Quaternion, Vector3};

use super::VehicleState;

pub const GRAVITY: f64 = 9.81;

/// Razor-frame IMU reading from two consecutive plant states.
///
/// The body frame is x forward, y right, z down, so a counterclockwise yaw
/// rate shows up as negative gyro z. Acceleration carries gravity on +z plus
/// the finite-difference longitudinal and centripetal terms. Magnetic north
/// is the world +x axis.
pub fn sample_imu(prev: &VehicleState, curr: &VehicleState, dt: f64) -> ImuSample {
    let yaw_rate = (curr.heading - prev.heading) / dt;
    let accel_long = (curr.speed - prev.speed) / dt;
    let accel_left = curr.speed * yaw_rate;
    let (sin_h, cos_h) = curr.heading.sin_cos();
    let orientation = euler_to_quaternion(EulerAngles::new(0.0, 0.0, -curr.heading))
        .unwrap_or(Quaternion::IDENTITY);
    ImuSample {
        accel: Vector3::new(accel_long, -accel_left, GRAVITY),
        gyro: Vector3::new(0.0, 0.0, -yaw_rate),
        mag: Vector3::new(cos_h, sin_h, 0.0),
        orientation,
        frame: ImuFrame::Razor,
        stamp: curr.stamp,
    }
}
