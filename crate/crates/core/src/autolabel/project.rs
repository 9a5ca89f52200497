//! Map-frame labels to per-frame pixel labels.

use serde::{Deserialize, Serialize};

use crate::autolabel::render::{Cuboid, Render};
use crate::autolabel::types::{BoundaryPolyline, Pose};
use crate::detector::types::{LanePolyline, VehicleBox};
use crate::postprocess::camera::CameraModel;
use crate::rect::Rect;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProjectParams {
    /// Boundary points closer than this (vehicle-frame x) are culled.
    pub near_m: f64,
    pub far_m: f64,
    /// Boundaries are resampled to at most this spacing before projection.
    pub step_m: f64,
    /// A knot is occluded when a vehicle surface is this much nearer.
    pub occlusion_tol_m: f64,
}

impl Default for ProjectParams {
    fn default() -> Self {
        Self {
            near_m: 2.0,
            far_m: 100.0,
            step_m: 1.0,
            occlusion_tol_m: 0.05,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FrameLabels {
    pub vehicles: Vec<VehicleBox>,
    pub lanes: Vec<LanePolyline>,
}

fn densify(points: &[[f64; 3]], step: f64) -> Vec<[f64; 3]> {
    let mut out = Vec::new();
    for w in points.windows(2) {
        let (p, q) = (w[0], w[1]);
        let len = ((q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2) + (q[2] - p[2]).powi(2)).sqrt();
        let n = (len / step - 1e-9).ceil().max(1.0) as usize;
        for i in 0..n {
            let t = i as f64 / n as f64;
            out.push([p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1]), p[2] + t * (q[2] - p[2])]);
        }
    }
    if let Some(last) = points.last() {
        out.push(*last);
    }
    out
}

/// Projects one map boundary into the frame. Points outside `[near, far]`
/// ahead are culled; knots hidden behind a rendered vehicle stay in the
/// label with their occlusion flag set.
pub fn project_boundary(
    b: &BoundaryPolyline,
    pose: &Pose,
    cam: &CameraModel,
    params: &ProjectParams,
    render: Option<&Render>,
) -> Option<LanePolyline> {
    let mut knots = Vec::new();
    let mut occluded = Vec::new();
    for p in densify(&b.points, params.step_m) {
        let v = pose.to_vehicle(p);
        if v[0] < params.near_m || v[0] > params.far_m {
            continue;
        }
        let Some((u, vv, depth)) = cam.project(v) else {
            continue;
        };
        let hidden = render.is_some_and(|r| {
            let (w, h) = (r.image.width() as f64, r.image.height() as f64);
            if u < 0.0 || vv < 0.0 || u >= w || vv >= h {
                return false;
            }
            let i = vv as usize * r.width() + u as usize;
            (r.vehicle_depth[i] as f64) < depth - params.occlusion_tol_m
        });
        knots.push([u, vv, depth]);
        occluded.push(hidden);
    }
    (knots.len() >= 2).then(|| LanePolyline {
        boundary: b.slot(),
        knots,
        occluded: if occluded.iter().any(|&o| o) { occluded } else { Vec::new() },
    })
}

/// Image-space box of a cuboid (bounding box of its projected corners,
/// clipped to the image) and the depth of its rear face center. `None` when
/// any corner is behind the camera or the box misses the image.
pub fn project_vehicle(c: &Cuboid, pose: &Pose, cam: &CameraModel, width: usize, height: usize) -> Option<VehicleBox> {
    let mut pts = Vec::with_capacity(8);
    for corner in c.corners() {
        let (u, v, _) = cam.project(pose.to_vehicle(corner))?;
        pts.push([u, v]);
    }
    let r = Rect::bounding(pts)?;
    let clipped = Rect::new(r.x1.max(0.0), r.y1.max(0.0), r.x2.min(width as f64), r.y2.min(height as f64));
    if !clipped.is_valid() {
        return None;
    }
    let (_, _, depth) = cam.project(pose.to_vehicle(c.rear_center()))?;
    Some(VehicleBox::truth(clipped, depth))
}

pub fn project_labels(
    boundaries: &[BoundaryPolyline],
    vehicles: &[Cuboid],
    pose: &Pose,
    cam: &CameraModel,
    size: (usize, usize),
    params: &ProjectParams,
    render: Option<&Render>,
) -> FrameLabels {
    FrameLabels {
        vehicles: vehicles
            .iter()
            .filter_map(|c| project_vehicle(c, pose, cam, size.0, size.1))
            .collect(),
        lanes: boundaries
            .iter()
            .filter_map(|b| project_boundary(b, pose, cam, params, render))
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autolabel::types::Side;

    fn cam() -> CameraModel {
        CameraModel {
            focal: 400.0,
            cx: 160.0,
            cy: 120.0,
            height: 1.5,
            pitch: 0.0,
        }
    }

    fn origin() -> Pose {
        Pose {
            t: 0.0,
            x: 0.0,
            y: 0.0,
            z: 0.0,
            heading: 0.0,
        }
    }

    #[test]
    fn straight_boundary_is_a_line_toward_the_horizon() {
        let b = BoundaryPolyline {
            side: Side::Right,
            offset_index: 0,
            points: vec![[-10.0, -1.8, 0.0], [150.0, -1.8, 0.0]],
        };
        let l = project_boundary(&b, &origin(), &cam(), &ProjectParams::default(), None).unwrap();
        assert_eq!(l.boundary, 1);
        assert!(l.knots.len() > 90);
        for w in l.knots.windows(2) {
            // moving away: v decreases toward the horizon, u toward the center
            assert!(w[1][1] < w[0][1] && w[1][0] < w[0][0] && w[1][2] > w[0][2]);
        }
        for k in &l.knots {
            // all knots on the line through the vanishing point
            let slope = (k[0] - 160.0) / (k[1] - 120.0);
            assert!((slope - 1.8 / 1.5).abs() < 1e-9);
        }
    }

    #[test]
    fn behind_camera_culled() {
        let b = BoundaryPolyline {
            side: Side::Left,
            offset_index: 0,
            points: vec![[-50.0, 1.8, 0.0], [-5.0, 1.8, 0.0]],
        };
        assert!(project_boundary(&b, &origin(), &cam(), &ProjectParams::default(), None).is_none());
    }
}
