//! Simulated vehicle: drive and steering actuators, kinematics, encoder
//! channels and the LIDAR/IMU/camera sources.

mod dynamics;
mod encoder;
mod imu;
mod lidar;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use dynamics::{pwm_to_voltage, step_drive, step_kinematics, step_steering};
pub use encoder::{counts_per_rev, encoder_edges, encoder_position};
pub use imu::{sample_imu, GRAVITY};
pub use lidar::{load_world, parse_world, scan_lidar, Pose, Segment, WorldModel};

use crate::msgs::Timestamp;

#[derive(Debug, Error, PartialEq)]
pub enum PlantError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid plant config: {field} {reason}")]
    InvalidConfig { field: &'static str, reason: String },
    #[error("world file line {line}: {reason}")]
    WorldParse { line: usize, reason: String },
    #[error("cannot read world file {path}: {reason}")]
    WorldIo { path: String, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LidarModel {
    /// 5 Hz, 5 m.
    Neato,
    /// 8 Hz, 10 m.
    Ydlidar,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LidarConfig {
    pub model: LidarModel,
    /// Overrides the model's scan rate.
    pub rate_hz: Option<f64>,
    /// Overrides the model's maximum range.
    pub range_max: Option<f64>,
}

impl Default for LidarConfig {
    fn default() -> Self {
        LidarConfig { model: LidarModel::Neato, rate_hz: None, range_max: None }
    }
}

impl LidarConfig {
    pub fn rate_hz(&self) -> f64 {
        self.rate_hz.unwrap_or(match self.model {
            LidarModel::Neato => 5.0,
            LidarModel::Ydlidar => 8.0,
        })
    }

    pub fn range_max(&self) -> f64 {
        self.range_max.unwrap_or(match self.model {
            LidarModel::Neato => 5.0,
            LidarModel::Ydlidar => 10.0,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlantConfig {
    /// Meters.
    pub wheel_radius: f64,
    /// Steady-state speed at full drive duty, m/s.
    pub v_max: f64,
    pub wheelbase: f64,
    /// Steering angle limit, radians either side.
    pub steer_limit: f64,
    /// Encoder-shaft revolutions per wheel revolution.
    pub drive_gear_ratio: f64,
    /// Encoder-shaft revolutions per steering-column revolution.
    pub steer_gear_ratio: f64,
    pub encoder_ppr: u32,
    /// Seconds.
    pub drive_time_constant: f64,
    /// rad/s per unit steering duty.
    pub steer_rate_gain: f64,
    pub v_bat_drive: f64,
    pub v_bat_steer: f64,
    pub lidar: LidarConfig,
    pub imu_rate_hz: f64,
    pub camera_rate_hz: f64,
}

impl Default for PlantConfig {
    fn default() -> Self {
        PlantConfig {
            wheel_radius: 0.1,
            v_max: 1.12,
            wheelbase: 0.8,
            steer_limit: 0.5,
            drive_gear_ratio: 5.0,
            steer_gear_ratio: 3.0,
            encoder_ppr: 600,
            drive_time_constant: 0.3,
            steer_rate_gain: 2.0,
            v_bat_drive: 9.6,
            v_bat_steer: 9.0,
            lidar: LidarConfig::default(),
            imu_rate_hz: 50.0,
            camera_rate_hz: 10.0,
        }
    }
}

impl PlantConfig {
    pub fn validate(&self) -> Result<(), PlantError> {
        let positive = [
            ("wheel_radius", self.wheel_radius),
            ("v_max", self.v_max),
            ("wheelbase", self.wheelbase),
            ("steer_limit", self.steer_limit),
            ("drive_gear_ratio", self.drive_gear_ratio),
            ("steer_gear_ratio", self.steer_gear_ratio),
            ("encoder_ppr", self.encoder_ppr as f64),
            ("drive_time_constant", self.drive_time_constant),
            ("steer_rate_gain", self.steer_rate_gain),
            ("v_bat_drive", self.v_bat_drive),
            ("v_bat_steer", self.v_bat_steer),
            ("lidar.rate_hz", self.lidar.rate_hz()),
            ("lidar.range_max", self.lidar.range_max()),
            ("imu_rate_hz", self.imu_rate_hz),
            ("camera_rate_hz", self.camera_rate_hz),
        ];
        for (field, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(PlantError::InvalidConfig { field, reason: format!("must be positive, got {v}") });
            }
        }
        if self.steer_limit >= std::f64::consts::FRAC_PI_2 {
            return Err(PlantError::InvalidConfig {
                field: "steer_limit",
                reason: format!("must be below pi/2, got {}", self.steer_limit),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    pub x: f64,
    pub y: f64,
    /// Counterclockwise from the world x axis, unwrapped.
    pub heading: f64,
    pub speed: f64,
    pub steer_angle: f64,
    pub drive_shaft_angle: f64,
    pub steer_shaft_angle: f64,
    pub stamp: Timestamp,
}

impl VehicleState {
    pub fn pose(&self) -> Pose {
        Pose { x: self.x, y: self.y, heading: self.heading }
    }
}

/// The vehicle, advanced only by [`Plant::step`].
#[derive(Debug, Clone)]
pub struct Plant {
    cfg: PlantConfig,
    state: VehicleState,
}

impl Plant {
    pub fn new(cfg: PlantConfig) -> Result<Self, PlantError> {
        cfg.validate()?;
        Ok(Plant { cfg, state: VehicleState::default() })
    }

    pub fn with_state(cfg: PlantConfig, state: VehicleState) -> Result<Self, PlantError> {
        cfg.validate()?;
        Ok(Plant { cfg, state })
    }

    pub fn config(&self) -> &PlantConfig {
        &self.cfg
    }

    pub fn state(&self) -> &VehicleState {
        &self.state
    }

    /// Applies both H-bridge duties for `dt` seconds, ending at `stamp`.
    pub fn step(
        &mut self,
        steer_duty: f64,
        drive_duty: f64,
        dt: f64,
        stamp: Timestamp,
    ) -> Result<&VehicleState, PlantError> {
        let drive_v = pwm_to_voltage(drive_duty, self.cfg.v_bat_drive)?;
        let steer_v = pwm_to_voltage(steer_duty, self.cfg.v_bat_steer)?;
        let mut s = self.state;
        s.speed = step_drive(s.speed, drive_v / self.cfg.v_bat_drive, dt, &self.cfg);
        s.steer_angle = step_steering(s.steer_angle, steer_v / self.cfg.v_bat_steer, dt, &self.cfg);
        self.state = step_kinematics(&s, dt, &self.cfg);
        self.state.stamp = stamp;
        Ok(&self.state)
    }
}
