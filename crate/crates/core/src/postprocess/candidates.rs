use crate::detector::types::{DetectionGrid, LaneSegmentDet, VehicleBox, LANE, VEHICLE};
use crate::rect::Rect;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Candidates {
    pub vehicles: Vec<VehicleBox>,
    pub lanes: Vec<LaneSegmentDet>,
    /// Active cells whose decoded geometry was degenerate (inverted box,
    /// non-positive depth, coincident endpoints).
    pub rejected: usize,
}

/// One candidate per cell whose most probable class is vehicle or lane with
/// probability above `threshold`, in row-major cell order.
pub fn extract_candidates(grid: &DetectionGrid, threshold: f64) -> Candidates {
    let mut out = Candidates::default();
    for cell in &grid.cells {
        let class = cell.argmax();
        let p = cell.probs[class as usize] as f64;
        if p <= threshold && threshold > 0.0 {
            continue;
        }
        match class {
            VEHICLE => {
                let v = cell.vehicle.map(|x| x as f64);
                let rect = Rect::new(v[0], v[1], v[2], v[3]);
                if rect.is_valid() && v[4].is_finite() && v[4] > 0.0 {
                    out.vehicles.push(VehicleBox {
                        rect,
                        depth: v[4],
                        score: p,
                    });
                } else {
                    out.rejected += 1;
                }
            }
            LANE => {
                let l = cell.lane.map(|x| x as f64);
                let seg = LaneSegmentDet {
                    a: [l[0], l[1]],
                    b: [l[2], l[3]],
                    depth_a: l[4],
                    depth_b: l[5],
                    score: p,
                };
                let distinct = seg.a != seg.b;
                let finite = l.iter().all(|x| x.is_finite());
                if distinct && finite && seg.depth_a > 0.0 && seg.depth_b > 0.0 {
                    out.lanes.push(seg);
                } else {
                    out.rejected += 1;
                }
            }
            _ => {}
        }
    }
    out
}
