use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{LidarConfig, PlantError};
use crate::msgs::{LaserScan, Timestamp, SCAN_BEAMS};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
}

impl Segment {
    pub fn new(x1: f64, y1: f64, x2: f64, y2: f64) -> Self {
        Segment { x1, y1, x2, y2 }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

/// Walls and obstacles as 2D line segments, meters.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WorldModel {
    pub segments: Vec<Segment>,
}

impl WorldModel {
    pub fn new(segments: Vec<Segment>) -> Self {
        WorldModel { segments }
    }

    /// Distance along the ray to the nearest segment, if any.
    pub fn raycast(&self, ox: f64, oy: f64, angle: f64) -> Option<f64> {
        let (dy, dx) = angle.sin_cos();
        let mut best: Option<f64> = None;
        for s in &self.segments {
            let (ex, ey) = (s.x2 - s.x1, s.y2 - s.y1);
            let denom = dx * ey - dy * ex;
            if denom.abs() < 1e-15 {
                continue;
            }
            let (px, py) = (s.x1 - ox, s.y1 - oy);
            let t = (px * ey - py * ex) / denom;
            let u = (px * dy - py * dx) / denom;
            if t > 1e-12 && (0.0..=1.0).contains(&u) && best.is_none_or(|b| t < b) {
                best = Some(t);
            }
        }
        best
    }
}

/// Parses a world file: one `x1 y1 x2 y2` segment per line, `#` starts a
/// comment, blank lines are ignored.
pub fn parse_world(text: &str) -> Result<WorldModel, PlantError> {
    let mut segments = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |reason: String| PlantError::WorldParse { line: idx + 1, reason };
        let nums = line
            .split_whitespace()
            .map(|tok| tok.parse::<f64>().map_err(|_| err(format!("not a number: {tok:?}"))))
            .collect::<Result<Vec<_>, _>>()?;
        if nums.len() != 4 {
            return Err(err(format!("expected 4 numbers, found {}", nums.len())));
        }
        if nums.iter().any(|v| !v.is_finite()) {
            return Err(err("coordinates must be finite".into()));
        }
        segments.push(Segment::new(nums[0], nums[1], nums[2], nums[3]));
    }
    Ok(WorldModel { segments })
}

pub fn load_world(path: &Path) -> Result<WorldModel, PlantError> {
    let text = std::fs::read_to_string(path).map_err(|e| PlantError::WorldIo {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?;
    parse_world(&text)
}

/// One revolution of 360 beams, 1 degree apart, counterclockwise from the
/// vehicle heading. Beams with no return inside `range_max` are invalid.
pub fn scan_lidar(world: &WorldModel, pose: Pose, cfg: &LidarConfig, stamp: Timestamp) -> LaserScan {
    let range_max = cfg.range_max();
    let mut scan = LaserScan::empty(range_max, stamp);
    for i in 0..SCAN_BEAMS {
        let angle = pose.heading + i as f64 * scan.angle_increment;
        if let Some(r) = world.raycast(pose.x, pose.y, angle) {
            if r <= range_max {
                scan.ranges[i] = r;
                scan.valid[i] = true;
            }
        }
    }
    scan
}
