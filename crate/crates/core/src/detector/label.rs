use serde::{Deserialize, Serialize};

use crate::detector::types::{GridLabel, LanePolyline, VehicleBox, LANE, VEHICLE};
use crate::geometry::GridGeometry;
use crate::rect::Rect;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RasterParams {
    /// Fraction of each box dimension removed before rasterizing (0.75 keeps 25%).
    pub shrink: f64,
    /// A lane cell fires when its center is within this many pixels of the boundary.
    pub lane_band_px: f64,
    /// Half the image-space arc length of each cell's lane segment target.
    pub lane_segment_half_px: f64,
}

impl Default for RasterParams {
    fn default() -> Self {
        Self {
            shrink: 0.75,
            lane_band_px: 2.0,
            lane_segment_half_px: 4.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct RasterStats {
    pub vehicle_cells: usize,
    pub lane_cells: usize,
    /// Boxes too small to own a single cell after shrinking.
    pub dropped_vehicles: usize,
}

pub fn shrink_box(rect: &Rect, factor: f64) -> Rect {
    rect.shrink(factor)
}

/// Image-space polyline with arc-length lookup.
pub(crate) struct PixelPolyline<'a> {
    knots: &'a [[f64; 3]],
    cumulative: Vec<f64>,
}

impl<'a> PixelPolyline<'a> {
    pub fn new(knots: &'a [[f64; 3]]) -> Self {
        let mut cumulative = Vec::with_capacity(knots.len());
        let mut s = 0.0;
        for (i, k) in knots.iter().enumerate() {
            if i > 0 {
                let p = knots[i - 1];
                s += ((k[0] - p[0]).powi(2) + (k[1] - p[1]).powi(2)).sqrt();
            }
            cumulative.push(s);
        }
        Self { knots, cumulative }
    }

    pub fn length(&self) -> f64 {
        self.cumulative.last().copied().unwrap_or(0.0)
    }

    /// Distance from `(x, y)` to the polyline and the arc length of the closest point.
    pub fn closest(&self, x: f64, y: f64) -> Option<(f64, f64)> {
        if self.knots.len() < 2 {
            return None;
        }
        let mut best: Option<(f64, f64)> = None;
        for i in 0..self.knots.len() - 1 {
            let (p, q) = (self.knots[i], self.knots[i + 1]);
            let (dx, dy) = (q[0] - p[0], q[1] - p[1]);
            let len2 = dx * dx + dy * dy;
            let t = if len2 > 0.0 {
                (((x - p[0]) * dx + (y - p[1]) * dy) / len2).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let (cx, cy) = (p[0] + t * dx, p[1] + t * dy);
            let d = ((x - cx).powi(2) + (y - cy).powi(2)).sqrt();
            if best.is_none_or(|(bd, _)| d < bd) {
                let seg = self.cumulative[i + 1] - self.cumulative[i];
                best = Some((d, self.cumulative[i] + t * seg));
            }
        }
        best
    }

    /// `(u, v, depth)` at arc length `s`, clamped to the ends.
    pub fn at(&self, s: f64) -> [f64; 3] {
        let s = s.clamp(0.0, self.length());
        let i = match self.cumulative.partition_point(|&c| c <= s) {
            0 => 0,
            n => (n - 1).min(self.knots.len() - 2),
        };
        let seg = self.cumulative[i + 1] - self.cumulative[i];
        let t = if seg > 0.0 { (s - self.cumulative[i]) / seg } else { 0.0 };
        let (p, q) = (self.knots[i], self.knots[i + 1]);
        [
            p[0] + t * (q[0] - p[0]),
            p[1] + t * (q[1] - p[1]),
            p[2] + t * (q[2] - p[2]),
        ]
    }
}

/// Builds per-cell class labels and regression targets.
///
/// A cell is vehicle-active when its whole region lies inside a shrunk box
/// (nearest box center wins when several qualify); its target is the
/// unshrunk box and depth. Remaining cells whose centers lie within the lane
/// band of a boundary become lane cells targeting the local boundary
/// segment. Only cells fully inside the image are labeled.
pub fn rasterize_labels(
    boxes: &[VehicleBox],
    lanes: &[LanePolyline],
    geometry: &GridGeometry,
    params: &RasterParams,
) -> (GridLabel, RasterStats) {
    let mut label = GridLabel::empty(*geometry);
    let mut stats = RasterStats::default();
    let shrunk: Vec<Rect> = boxes.iter().map(|b| shrink_box(&b.rect, params.shrink)).collect();
    let mut owner: Vec<Option<usize>> = vec![None; geometry.cell_count()];
    let cell = geometry.cell as f64;

    for (i, s) in shrunk.iter().enumerate() {
        if !(s.width() > 0.0 && s.height() > 0.0) {
            continue;
        }
        let gx0 = (s.x1 / cell).ceil().max(0.0) as usize;
        let gy0 = (s.y1 / cell).ceil().max(0.0) as usize;
        let gx1 = ((s.x2 / cell).floor().max(0.0) as usize).min(geometry.cells_x());
        let gy1 = ((s.y2 / cell).floor().max(0.0) as usize).min(geometry.cells_y());
        for gy in gy0..gy1 {
            for gx in gx0..gx1 {
                let c = geometry.cell(gx, gy);
                if !geometry.in_image(&c) {
                    continue;
                }
                let idx = geometry.index(gx, gy);
                let (cx, cy) = c.center();
                if let Some(prev) = owner[idx] {
                    // claimed already: keep whichever box center is nearer
                    let pc = boxes[prev].rect.center();
                    let nc = boxes[i].rect.center();
                    let dp = (pc.0 - cx).powi(2) + (pc.1 - cy).powi(2);
                    let dn = (nc.0 - cx).powi(2) + (nc.1 - cy).powi(2);
                    if dn >= dp {
                        continue;
                    }
                }
                let r = boxes[i].rect;
                owner[idx] = Some(i);
                label.cell_class[idx] = VEHICLE;
                label.reg_mask[idx] = true;
                label.vehicle_targets[idx] =
                    [r.x1 as f32, r.y1 as f32, r.x2 as f32, r.y2 as f32, boxes[i].depth as f32];
            }
        }
    }
    stats.vehicle_cells = owner.iter().flatten().count();
    stats.dropped_vehicles = (0..boxes.len())
        .filter(|i| !owner.contains(&Some(*i)))
        .count();

    let polys: Vec<PixelPolyline> = lanes.iter().map(|l| PixelPolyline::new(&l.knots)).collect();
    let band = params.lane_band_px;
    for (poly, lane) in polys.iter().zip(lanes) {
        if lane.knots.len() < 2 {
            continue;
        }
        let (mut u0, mut v0, mut u1, mut v1) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
        for k in &lane.knots {
            u0 = u0.min(k[0]);
            v0 = v0.min(k[1]);
            u1 = u1.max(k[0]);
            v1 = v1.max(k[1]);
        }
        let gx0 = ((u0 - band) / cell).floor().max(0.0) as usize;
        let gy0 = ((v0 - band) / cell).floor().max(0.0) as usize;
        let gx1 = (((u1 + band) / cell).ceil().max(0.0) as usize).min(geometry.cells_x());
        let gy1 = (((v1 + band) / cell).ceil().max(0.0) as usize).min(geometry.cells_y());
        for gy in gy0..gy1 {
            for gx in gx0..gx1 {
                let c = geometry.cell(gx, gy);
                let idx = geometry.index(gx, gy);
                if !geometry.in_image(&c) || label.cell_class[idx] == VEHICLE {
                    continue;
                }
                let (cx, cy) = c.center();
                let Some((d, s)) = poly.closest(cx, cy) else {
                    continue;
                };
                if d > band {
                    continue;
                }
                let h = params.lane_segment_half_px;
                let (mut a, mut b) = (poly.at(s - h), poly.at(s + h));
                if ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt() < 1.0 {
                    continue;
                }
                if b[2] < a[2] {
                    std::mem::swap(&mut a, &mut b);
                }
                let target = [a[0], a[1], b[0], b[1], a[2], b[2]].map(|v| v as f32);
                if label.cell_class[idx] == LANE {
                    // nearest boundary wins
                    let (pd, _) = label_distance(&label.lane_targets[idx], cx, cy);
                    let (nd, _) = label_distance(&target, cx, cy);
                    if nd >= pd {
                        continue;
                    }
                }
                label.cell_class[idx] = LANE;
                label.reg_mask[idx] = true;
                label.lane_targets[idx] = target;
            }
        }
    }
    stats.lane_cells = label.count(LANE);
    (label, stats)
}

fn label_distance(t: &[f32; 6], x: f64, y: f64) -> (f64, f64) {
    let knots = [
        [t[0] as f64, t[1] as f64, t[4] as f64],
        [t[2] as f64, t[3] as f64, t[5] as f64],
    ];
    PixelPolyline::new(&knots).closest(x, y).unwrap_or((f64::MAX, 0.0))
}
