use serde::{Deserialize, Serialize};

use crate::geometry::GridGeometry;
use crate::rect::Rect;

pub const BACKGROUND: u8 = 0;
pub const VEHICLE: u8 = 1;
pub const LANE: u8 = 2;
pub const NUM_CLASSES: usize = 3;
pub const VEHICLE_REG: usize = 5;
pub const LANE_REG: usize = 6;
/// Logits, vehicle regression, lane regression.
pub const CHANNELS_PER_CELL: usize = NUM_CLASSES + VEHICLE_REG + LANE_REG;

/// A vehicle in pixel space: rectangle, depth in meters, confidence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleBox {
    pub rect: Rect,
    pub depth: f64,
    pub score: f64,
}

impl VehicleBox {
    pub fn truth(rect: Rect, depth: f64) -> Self {
        Self {
            rect,
            depth,
            score: 1.0,
        }
    }
}

/// A local lane-boundary segment in pixel space with endpoint depths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaneSegmentDet {
    pub a: [f64; 2],
    pub b: [f64; 2],
    pub depth_a: f64,
    pub depth_b: f64,
    pub score: f64,
}

impl LaneSegmentDet {
    pub fn midpoint(&self) -> [f64; 2] {
        [(self.a[0] + self.b[0]) / 2.0, (self.a[1] + self.b[1]) / 2.0]
    }

    pub fn mean_depth(&self) -> f64 {
        (self.depth_a + self.depth_b) / 2.0
    }
}

/// A ground-truth lane boundary projected into an image: knots `(u, v, depth)`.
///
/// `boundary` is the signed lateral slot relative to the ego lane:
/// -1 / +1 are the ego boundaries, -2 / +2 the outer boundaries of the
/// adjacent lanes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LanePolyline {
    pub boundary: i32,
    pub knots: Vec<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub occluded: Vec<bool>,
}

/// Decoded prediction for one mask cell, in pixels and meters.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CellPrediction {
    pub probs: [f32; NUM_CLASSES],
    pub vehicle: [f32; VEHICLE_REG],
    pub lane: [f32; LANE_REG],
}

impl CellPrediction {
    /// Most probable class; ties resolve to the lower class index.
    pub fn argmax(&self) -> u8 {
        let mut best = 0;
        for c in 1..NUM_CLASSES {
            if self.probs[c] > self.probs[best] {
                best = c;
            }
        }
        best as u8
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionGrid {
    pub geometry: GridGeometry,
    pub cells: Vec<CellPrediction>,
}

impl DetectionGrid {
    pub fn get(&self, gx: usize, gy: usize) -> &CellPrediction {
        &self.cells[self.geometry.index(gx, gy)]
    }
}

/// Rasterized training targets over the mask grid (pixel / meter units).
#[derive(Debug, Clone, PartialEq)]
pub struct GridLabel {
    pub geometry: GridGeometry,
    pub cell_class: Vec<u8>,
    pub vehicle_targets: Vec<[f32; VEHICLE_REG]>,
    pub lane_targets: Vec<[f32; LANE_REG]>,
    /// Cells whose regression head for their class is supervised.
    pub reg_mask: Vec<bool>,
}

impl GridLabel {
    pub fn empty(geometry: GridGeometry) -> Self {
        let n = geometry.cell_count();
        Self {
            geometry,
            cell_class: vec![BACKGROUND; n],
            vehicle_targets: vec![[0.0; VEHICLE_REG]; n],
            lane_targets: vec![[0.0; LANE_REG]; n],
            reg_mask: vec![false; n],
        }
    }

    pub fn count(&self, class: u8) -> usize {
        self.cell_class.iter().filter(|&&c| c == class).count()
    }
}
