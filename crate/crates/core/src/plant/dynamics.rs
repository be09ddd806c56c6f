use super::{PlantConfig, PlantError, VehicleState};

/// H-bridge output: exactly linear in duty, signed.
pub fn pwm_to_voltage(duty: f64, v_bat: f64) -> Result<f64, PlantError> {
    if duty.is_nan() || duty.abs() > 1.0 {
        return Err(PlantError::InvalidArgument(format!("duty {duty} outside [-1, 1]")));
    }
    Ok(duty * v_bat)
}

/// First-order lag of vehicle speed toward `duty * v_max`.
pub fn step_drive(v: f64, duty: f64, dt: f64, cfg: &PlantConfig) -> f64 {
    let target = duty.clamp(-1.0, 1.0) * cfg.v_max;
    let alpha = 1.0 - (-dt / cfg.drive_time_constant).exp();
    (v + (target - v) * alpha).clamp(-cfg.v_max, cfg.v_max)
}

/// Rate-controlled steering with a hard mechanical stop.
pub fn step_steering(delta: f64, duty: f64, dt: f64, cfg: &PlantConfig) -> f64 {
    (delta + cfg.steer_rate_gain * duty * dt).clamp(-cfg.steer_limit, cfg.steer_limit)
}

/// Kinematic bicycle model, explicit Euler. Shaft angles follow the wheel
/// and the steering column through their gear ratios. The stamp is left to
/// the caller, which owns the clock.
pub fn step_kinematics(s: &VehicleState, dt: f64, cfg: &PlantConfig) -> VehicleState {
    let (sin_h, cos_h) = s.heading.sin_cos();
    VehicleState {
        x: s.x + s.speed * cos_h * dt,
        y: s.y + s.speed * sin_h * dt,
        heading: s.heading + s.speed / cfg.wheelbase * s.steer_angle.tan() * dt,
        speed: s.speed,
        steer_angle: s.steer_angle,
        drive_shaft_angle: s.drive_shaft_angle + s.speed / cfg.wheel_radius * cfg.drive_gear_ratio * dt,
        steer_shaft_angle: s.steer_angle * cfg.steer_gear_ratio,
        stamp: s.stamp,
    }
}
