//! From a decoded grid to final vehicles and lanes.

pub mod camera;
pub mod candidates;
pub mod dbscan;
pub mod merge;
pub mod spline;

pub use camera::{ipm_to_3d, CameraModel};
pub use candidates::{extract_candidates, Candidates};
pub use dbscan::{dbscan_points, dbscan_segments, segment_distance, DbscanParams, Segment3, SegmentMetric};
pub use merge::{merge_boxes, similar, MergeParams};
pub use spline::{link_spline, Lane};

use serde::{Deserialize, Serialize};

use crate::detector::types::{DetectionGrid, LaneSegmentDet, VehicleBox};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PostprocessParams {
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default)]
    pub merge: MergeParams,
    #[serde(default)]
    pub dbscan: DbscanParams,
    /// Lanes with fewer member segments are discarded.
    #[serde(default = "default_min_lane_segments")]
    pub min_lane_segments: usize,
}

fn default_threshold() -> f64 {
    0.5
}

fn default_min_lane_segments() -> usize {
    3
}

impl Default for PostprocessParams {
    fn default() -> Self {
        Self {
            threshold: default_threshold(),
            merge: MergeParams::default(),
            dbscan: DbscanParams::default(),
            min_lane_segments: default_min_lane_segments(),
        }
    }
}

impl PostprocessParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.threshold) {
            return Err(crate::Error::config(format!(
                "activation threshold {} outside [0, 1)",
                self.threshold
            )));
        }
        self.merge.validate()?;
        self.dbscan.validate()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FrameDetections {
    pub vehicles: Vec<VehicleBox>,
    pub lanes: Vec<Lane>,
    pub candidates_vehicle: usize,
    pub candidates_lane: usize,
}

/// Lifts segments to the vehicle frame for clustering.
pub fn lift_segments(segments: &[LaneSegmentDet], cam: &CameraModel) -> Result<Vec<Segment3>> {
    segments
        .iter()
        .map(|s| {
            Ok(Segment3 {
                a: ipm_to_3d(s.a, s.depth_a, cam)?,
                b: ipm_to_3d(s.b, s.depth_b, cam)?,
            })
        })
        .collect()
}

/// Clusters lane segments and links each cluster; lanes are numbered in
/// cluster order.
pub fn lanes_from_segments(
    segments: &[LaneSegmentDet],
    cam: &CameraModel,
    params: &PostprocessParams,
) -> Result<Vec<Lane>> {
    let lifted = lift_segments(segments, cam)?;
    let labels = dbscan_segments(&lifted, &params.dbscan);
    let n = labels.iter().flatten().max().map_or(0, |m| m + 1);
    let mut groups: Vec<Vec<LaneSegmentDet>> = vec![Vec::new(); n];
    for (s, l) in segments.iter().zip(&labels) {
        if let Some(l) = l {
            groups[*l].push(*s);
        }
    }
    let mut lanes = Vec::new();
    for g in groups.iter().filter(|g| g.len() >= params.min_lane_segments.max(1)) {
        lanes.push(link_spline(lanes.len(), g, cam)?);
    }
    Ok(lanes)
}

pub fn postprocess(grid: &DetectionGrid, cam: &CameraModel, params: &PostprocessParams) -> Result<FrameDetections> {
    let c = extract_candidates(grid, params.threshold);
    let vehicles = merge_boxes(&c.vehicles, &params.merge);
    let lanes = lanes_from_segments(&c.lanes, cam, params)?;
    Ok(FrameDetections {
        vehicles,
        lanes,
        candidates_vehicle: c.vehicles.len(),
        candidates_lane: c.lanes.len(),
    })
}
