use serde::{Deserialize, Serialize};

use crate::detector::types::{LANE_REG, VEHICLE_REG};

/// Regression targets as offsets from the cell center divided by `scale`
/// (the network's context size), depths divided by `depth_scale`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegressionCodec {
    pub scale: f64,
    #[serde(default = "default_depth_scale")]
    pub depth_scale: f64,
}

fn default_depth_scale() -> f64 {
    100.0
}

impl RegressionCodec {
    pub fn new(scale: f64) -> Self {
        Self {
            scale,
            depth_scale: default_depth_scale(),
        }
    }

    pub fn encode_vehicle(&self, center: (f64, f64), v: &[f32; VEHICLE_REG]) -> [f32; VEHICLE_REG] {
        let (cx, cy) = center;
        [
            ((v[0] as f64 - cx) / self.scale) as f32,
            ((v[1] as f64 - cy) / self.scale) as f32,
            ((v[2] as f64 - cx) / self.scale) as f32,
            ((v[3] as f64 - cy) / self.scale) as f32,
            (v[4] as f64 / self.depth_scale) as f32,
        ]
    }

    pub fn decode_vehicle(&self, center: (f64, f64), e: &[f32]) -> [f32; VEHICLE_REG] {
        let (cx, cy) = center;
        [
            (e[0] as f64 * self.scale + cx) as f32,
            (e[1] as f64 * self.scale + cy) as f32,
            (e[2] as f64 * self.scale + cx) as f32,
            (e[3] as f64 * self.scale + cy) as f32,
            (e[4] as f64 * self.depth_scale) as f32,
        ]
    }

    pub fn encode_lane(&self, center: (f64, f64), v: &[f32; LANE_REG]) -> [f32; LANE_REG] {
        let (cx, cy) = center;
        [
            ((v[0] as f64 - cx) / self.scale) as f32,
            ((v[1] as f64 - cy) / self.scale) as f32,
            ((v[2] as f64 - cx) / self.scale) as f32,
            ((v[3] as f64 - cy) / self.scale) as f32,
            (v[4] as f64 / self.depth_scale) as f32,
            (v[5] as f64 / self.depth_scale) as f32,
        ]
    }

    pub fn decode_lane(&self, center: (f64, f64), e: &[f32]) -> [f32; LANE_REG] {
        let (cx, cy) = center;
        [
            (e[0] as f64 * self.scale + cx) as f32,
            (e[1] as f64 * self.scale + cy) as f32,
            (e[2] as f64 * self.scale + cx) as f32,
            (e[3] as f64 * self.scale + cy) as f32,
            (e[4] as f64 * self.depth_scale) as f32,
            (e[5] as f64 * self.depth_scale) as f32,
        ]
    }
}
