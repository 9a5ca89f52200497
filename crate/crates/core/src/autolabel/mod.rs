//! Lane ground truth from a lidar map and the ego trajectory, and the
//! synthetic scene generator that stands in for recorded drives.

pub mod correction;
pub mod filter;
pub mod fit;
pub mod io;
pub mod project;
pub mod render;
pub mod replicate;
pub mod road;
pub mod synth;
pub mod types;

pub use correction::{apply_corrections, load_corrections, KnotCorrection};
pub use filter::{filter_points, BoundaryPoint, Candidates, FilterParams};
pub use fit::fit_boundary;
pub use project::{project_labels, FrameLabels, ProjectParams};
pub use render::{Cuboid, Render};
pub use replicate::{lane_width, offset_polyline, replicate_boundaries};
pub use road::Road;
pub use synth::{synth_scene, SynthConfig, SynthFrame, SynthScene};
pub use types::{distance_to_polyline, BoundaryPolyline, LidarPoint, Pose, Projection, Side, Trajectory};

use serde::{Deserialize, Serialize};

use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AutolabelParams {
    pub filter: FilterParams,
    pub knot_spacing_m: f64,
    pub lanes_left: usize,
    pub lanes_right: usize,
}

impl Default for AutolabelParams {
    fn default() -> Self {
        Self {
            filter: FilterParams::default(),
            knot_spacing_m: 5.0,
            lanes_left: 1,
            lanes_right: 1,
        }
    }
}

/// Filter, fit both ego boundaries and replicate; boundaries are returned
/// left to right.
pub fn autolabel(cloud: &[LidarPoint], traj: &Trajectory, params: &AutolabelParams) -> Result<Vec<BoundaryPolyline>> {
    params.filter.validate()?;
    let c = filter_points(cloud, traj, &params.filter)?;
    let left = fit_boundary(&c.left, traj, Side::Left, params.knot_spacing_m)?;
    let right = fit_boundary(&c.right, traj, Side::Right, params.knot_spacing_m)?;
    replicate_boundaries(&left, &right, params.lanes_left, params.lanes_right)
}

/// Root-mean-square ground-plane distance from `points` to `truth`.
pub fn rms_lateral_error(points: &[[f64; 3]], truth: &[[f64; 3]]) -> f64 {
    let sum: f64 = points
        .iter()
        .map(|p| distance_to_polyline(truth, p[0], p[1]).powi(2))
        .sum();
    (sum / points.len().max(1) as f64).sqrt()
}
