use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LidarPoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub intensity: f64,
}

/// Map-frame pose: position of the vehicle origin on the ground and heading
/// (radians, counterclockwise from +x).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub heading: f64,
}

impl Pose {
    /// Map point to the vehicle frame (x forward, y left, z up).
    pub fn to_vehicle(&self, p: [f64; 3]) -> [f64; 3] {
        let (s, c) = self.heading.sin_cos();
        let (dx, dy) = (p[0] - self.x, p[1] - self.y);
        [c * dx + s * dy, -s * dx + c * dy, p[2] - self.z]
    }

    pub fn to_map(&self, v: [f64; 3]) -> [f64; 3] {
        let (s, c) = self.heading.sin_cos();
        [self.x + c * v[0] - s * v[1], self.y + s * v[0] + c * v[1], self.z + v[2]]
    }
}

/// Where a map point falls relative to the trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    /// Arc length of the closest trajectory point.
    pub s: f64,
    /// Signed lateral distance, positive to the right of the direction of travel.
    pub d: f64,
    /// Trajectory height at `s`, used as the local ground.
    pub ground_z: f64,
    /// False when the closest point is a trajectory end and the point lies beyond it.
    pub covered: bool,
}

/// Ordered poses with cumulative arc length in the ground plane.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    poses: Vec<Pose>,
    arc: Vec<f64>,
}

impl Trajectory {
    pub fn new(poses: Vec<Pose>) -> Result<Self> {
        if poses.len() < 2 {
            return Err(Error::Data("a trajectory needs at least two poses".into()));
        }
        let mut arc = Vec::with_capacity(poses.len());
        let mut s = 0.0;
        for (i, p) in poses.iter().enumerate() {
            if !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite() && p.heading.is_finite()) {
                return Err(Error::Data(format!("pose {i} is not finite")));
            }
            if i > 0 {
                let q = &poses[i - 1];
                let step = (p.x - q.x).hypot(p.y - q.y);
                if step <= 0.0 {
                    return Err(Error::Data(format!("poses {} and {i} coincide", i - 1)));
                }
                s += step;
            }
            arc.push(s);
        }
        Ok(Self { poses, arc })
    }

    pub fn poses(&self) -> &[Pose] {
        &self.poses
    }

    pub fn length(&self) -> f64 {
        *self.arc.last().unwrap()
    }

    fn segment_at(&self, s: f64) -> usize {
        match self.arc.partition_point(|&a| a <= s) {
            0 => 0,
            n => (n - 1).min(self.poses.len() - 2),
        }
    }

    /// Unit direction of travel and right normal on segment `i`.
    fn frame(&self, i: usize) -> ([f64; 2], [f64; 2]) {
        let (p, q) = (&self.poses[i], &self.poses[i + 1]);
        let len = self.arc[i + 1] - self.arc[i];
        let t = [(q.x - p.x) / len, (q.y - p.y) / len];
        (t, [t[1], -t[0]])
    }

    /// Ground point at arc length `s` (clamped) shifted `d` meters to the right.
    pub fn point_at(&self, s: f64, d: f64) -> [f64; 3] {
        let s = s.clamp(0.0, self.length());
        let i = self.segment_at(s);
        let (p, q) = (&self.poses[i], &self.poses[i + 1]);
        let f = (s - self.arc[i]) / (self.arc[i + 1] - self.arc[i]);
        let (_, n) = self.frame(i);
        [
            p.x + f * (q.x - p.x) + d * n[0],
            p.y + f * (q.y - p.y) + d * n[1],
            p.z + f * (q.z - p.z),
        ]
    }

    /// Closest-point projection in the ground plane.
    pub fn project(&self, x: f64, y: f64) -> Projection {
        let mut best = (f64::INFINITY, 0usize, 0.0f64);
        for i in 0..self.poses.len() - 1 {
            let (p, q) = (&self.poses[i], &self.poses[i + 1]);
            let (dx, dy) = (q.x - p.x, q.y - p.y);
            let len2 = dx * dx + dy * dy;
            let f = (((x - p.x) * dx + (y - p.y) * dy) / len2).clamp(0.0, 1.0);
            let d2 = (x - p.x - f * dx).powi(2) + (y - p.y - f * dy).powi(2);
            if d2 < best.0 {
                best = (d2, i, f);
            }
        }
        let (_, i, f) = best;
        let (p, q) = (&self.poses[i], &self.poses[i + 1]);
        let (t, n) = self.frame(i);
        let (bx, by) = (p.x + f * (q.x - p.x), p.y + f * (q.y - p.y));
        let along = (x - bx) * t[0] + (y - by) * t[1];
        let covered = !((i == 0 && f == 0.0 && along < -1e-9)
            || (i == self.poses.len() - 2 && f == 1.0 && along > 1e-9));
        Projection {
            s: self.arc[i] + f * (self.arc[i + 1] - self.arc[i]),
            d: (x - bx) * n[0] + (y - by) * n[1],
            ground_z: p.z + f * (q.z - p.z),
            covered,
        }
    }

    /// Pose interpolated at arc length `s`, heading along the local segment.
    pub fn pose_at(&self, s: f64) -> Pose {
        let s = s.clamp(0.0, self.length());
        let i = self.segment_at(s);
        let f = (s - self.arc[i]) / (self.arc[i + 1] - self.arc[i]);
        let (p, q) = (&self.poses[i], &self.poses[i + 1]);
        let (t, _) = self.frame(i);
        Pose {
            t: p.t + f * (q.t - p.t),
            x: p.x + f * (q.x - p.x),
            y: p.y + f * (q.y - p.y),
            z: p.z + f * (q.z - p.z),
            heading: t[1].atan2(t[0]),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn name(self) -> &'static str {
        match self {
            Side::Left => "left",
            Side::Right => "right",
        }
    }
}

/// A lane boundary in the map frame.
///
/// `offset_index` counts lanes away from the ego boundary of the same side:
/// 0 is the ego boundary itself, -1, -2, ... lie further left and 1, 2, ...
/// further right.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryPolyline {
    pub side: Side,
    pub offset_index: i32,
    pub points: Vec<[f64; 3]>,
}

impl BoundaryPolyline {
    /// Signed lane slot relative to the ego lane: -1/+1 ego, -2/+2 adjacent outer.
    pub fn slot(&self) -> i32 {
        match self.side {
            Side::Left => -1 + self.offset_index,
            Side::Right => 1 + self.offset_index,
        }
    }
}

/// Ground-plane distance from `(x, y)` to a map polyline.
pub fn distance_to_polyline(points: &[[f64; 3]], x: f64, y: f64) -> f64 {
    if points.len() == 1 {
        return (x - points[0][0]).hypot(y - points[0][1]);
    }
    points
        .windows(2)
        .map(|w| {
            let (p, q) = (w[0], w[1]);
            let (dx, dy) = (q[0] - p[0], q[1] - p[1]);
            let len2 = dx * dx + dy * dy;
            let f = if len2 > 0.0 {
                (((x - p[0]) * dx + (y - p[1]) * dy) / len2).clamp(0.0, 1.0)
            } else {
                0.0
            };
            (x - p[0] - f * dx).hypot(y - p[1] - f * dy)
        })
        .fold(f64::INFINITY, f64::min)
}
