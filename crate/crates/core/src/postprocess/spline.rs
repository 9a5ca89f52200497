use serde::{Deserialize, Serialize};

use crate::detector::types::LaneSegmentDet;
use crate::error::{Error, Result};
use crate::postprocess::camera::{ipm_to_3d, CameraModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lane {
    pub id: usize,
    /// Member segments ordered near to far, each oriented near end first.
    pub segments: Vec<LaneSegmentDet>,
    /// Polyline knots in the image: `(u, v, depth)`.
    pub knots: Vec<[f64; 3]>,
    /// The same knots in the vehicle frame.
    pub polyline3d: Vec<[f64; 3]>,
}

fn oriented(s: &LaneSegmentDet) -> LaneSegmentDet {
    if s.depth_b < s.depth_a {
        LaneSegmentDet {
            a: s.b,
            b: s.a,
            depth_a: s.depth_b,
            depth_b: s.depth_a,
            score: s.score,
        }
    } else {
        *s
    }
}

/// Links one cluster of segments into a C0 polyline.
///
/// Segments are oriented near end first and sorted by mean depth (pixel
/// position breaks ties). The polyline starts at the first segment's near
/// end, places one knot at the average of each segment's far end and the
/// next segment's near end, and finishes at the last far end.
pub fn link_spline(id: usize, cluster: &[LaneSegmentDet], cam: &CameraModel) -> Result<Lane> {
    if cluster.is_empty() {
        return Err(Error::Domain("cannot link an empty lane cluster".into()));
    }
    let mut segs: Vec<LaneSegmentDet> = cluster.iter().map(oriented).collect();
    segs.sort_by(|p, q| {
        p.mean_depth()
            .total_cmp(&q.mean_depth())
            .then(p.a[1].total_cmp(&q.a[1]))
            .then(p.a[0].total_cmp(&q.a[0]))
            .then(p.b[1].total_cmp(&q.b[1]))
            .then(p.b[0].total_cmp(&q.b[0]))
    });
    let mut knots = Vec::with_capacity(segs.len() + 1);
    let first = &segs[0];
    knots.push([first.a[0], first.a[1], first.depth_a]);
    for w in segs.windows(2) {
        let (p, q) = (&w[0], &w[1]);
        knots.push([
            (p.b[0] + q.a[0]) / 2.0,
            (p.b[1] + q.a[1]) / 2.0,
            (p.depth_b + q.depth_a) / 2.0,
        ]);
    }
    let last = segs.last().unwrap();
    knots.push([last.b[0], last.b[1], last.depth_b]);
    let polyline3d = knots
        .iter()
        .map(|k| ipm_to_3d([k[0], k[1]], k[2], cam))
        .collect::<Result<Vec<_>>>()?;
    Ok(Lane {
        id,
        segments: segs,
        knots,
        polyline3d,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cam() -> CameraModel {
        CameraModel {
            focal: 400.0,
            cx: 160.0,
            cy: 120.0,
            height: 1.5,
            pitch: 0.0,
        }
    }

    fn seg(a: [f64; 2], b: [f64; 2], da: f64, db: f64) -> LaneSegmentDet {
        LaneSegmentDet {
            a,
            b,
            depth_a: da,
            depth_b: db,
            score: 1.0,
        }
    }

    #[test]
    fn single_segment_two_knots() {
        let l = link_spline(0, &[seg([10.0, 200.0], [20.0, 180.0], 10.0, 12.0)], &cam()).unwrap();
        assert_eq!(l.knots, vec![[10.0, 200.0, 10.0], [20.0, 180.0, 12.0]]);
        assert_eq!(l.polyline3d.len(), 2);
    }

    #[test]
    fn touching_collinear_segments() {
        let s1 = seg([0.0, 200.0], [10.0, 190.0], 10.0, 11.0);
        let s2 = seg([20.0, 180.0], [10.0, 190.0], 12.0, 11.0);
        let l = link_spline(3, &[s2, s1], &cam()).unwrap();
        assert_eq!(l.knots, vec![[0.0, 200.0, 10.0], [10.0, 190.0, 11.0], [20.0, 180.0, 12.0]]);
        assert_eq!(l.id, 3);
    }

    #[test]
    fn empty_cluster_rejected() {
        assert!(link_spline(0, &[], &cam()).is_err());
    }
}
