use crate::autolabel::types::{distance_to_polyline, BoundaryPolyline, Side};
use crate::error::{Error, Result};

/// Offsets a ground-plane polyline `dist` meters to its left (negative: right).
///
/// Vertices move along the miter direction so every offset segment stays
/// exactly `dist` from its source segment.
pub fn offset_polyline(points: &[[f64; 3]], dist: f64) -> Vec<[f64; 3]> {
    let n = points.len();
    if n < 2 {
        return points.to_vec();
    }
    let normals: Vec<[f64; 2]> = points
        .windows(2)
        .map(|w| {
            let (dx, dy) = (w[1][0] - w[0][0], w[1][1] - w[0][1]);
            let len = dx.hypot(dy).max(f64::MIN_POSITIVE);
            [-dy / len, dx / len]
        })
        .collect();
    (0..n)
        .map(|i| {
            let m = if i == 0 {
                normals[0]
            } else if i == n - 1 {
                normals[n - 2]
            } else {
                let (a, b) = (normals[i - 1], normals[i]);
                let s = [a[0] + b[0], a[1] + b[1]];
                let len = s[0].hypot(s[1]);
                if len < 1e-9 {
                    b
                } else {
                    let u = [s[0] / len, s[1] / len];
                    // stretch so the offset is measured along each segment normal
                    let c = u[0] * b[0] + u[1] * b[1];
                    [u[0] / c, u[1] / c]
                }
            };
            let p = points[i];
            [p[0] + dist * m[0], p[1] + dist * m[1], p[2]]
        })
        .collect()
}

/// Mean distance from the left boundary's knots to the right boundary.
pub fn lane_width(left: &BoundaryPolyline, right: &BoundaryPolyline) -> Result<f64> {
    if left.points.is_empty() || right.points.is_empty() {
        return Err(Error::Data("cannot measure lane width of an empty boundary".into()));
    }
    let sum: f64 = left
        .points
        .iter()
        .map(|p| distance_to_polyline(&right.points, p[0], p[1]))
        .sum();
    Ok(sum / left.points.len() as f64)
}

/// Ego boundaries plus `n_left` / `n_right` copies offset by multiples of the
/// lane width, ordered left to right.
pub fn replicate_boundaries(
    left: &BoundaryPolyline,
    right: &BoundaryPolyline,
    n_left: usize,
    n_right: usize,
) -> Result<Vec<BoundaryPolyline>> {
    let w = lane_width(left, right)?;
    let mut out = Vec::with_capacity(n_left + n_right + 2);
    for k in (1..=n_left).rev() {
        out.push(BoundaryPolyline {
            side: Side::Left,
            offset_index: -(k as i32),
            points: offset_polyline(&left.points, k as f64 * w),
        });
    }
    out.push(BoundaryPolyline {
        side: Side::Left,
        offset_index: 0,
        points: left.points.clone(),
    });
    out.push(BoundaryPolyline {
        side: Side::Right,
        offset_index: 0,
        points: right.points.clone(),
    });
    for k in 1..=n_right {
        out.push(BoundaryPolyline {
            side: Side::Right,
            offset_index: k as i32,
            points: offset_polyline(&right.points, -(k as f64) * w),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(y: f64, side: Side) -> BoundaryPolyline {
        BoundaryPolyline {
            side,
            offset_index: 0,
            points: (0..10).map(|i| [i as f64 * 5.0, y, 0.0]).collect(),
        }
    }

    #[test]
    fn straight_replication() {
        // centerline y = 0, left of travel is +y
        let (l, r) = (line(1.8, Side::Left), line(-1.8, Side::Right));
        let all = replicate_boundaries(&l, &r, 1, 0).unwrap();
        assert_eq!(all.len(), 3);
        assert_eq!(all[0].offset_index, -1);
        for p in &all[0].points {
            assert!((p[1] - (1.8 + 3.6)).abs() < 1e-12);
        }
        assert_eq!(replicate_boundaries(&l, &r, 0, 0).unwrap().len(), 2);
    }

    #[test]
    fn slots() {
        let all = replicate_boundaries(&line(1.8, Side::Left), &line(-1.8, Side::Right), 1, 1).unwrap();
        let slots: Vec<i32> = all.iter().map(BoundaryPolyline::slot).collect();
        assert_eq!(slots, vec![-2, -1, 1, 2]);
    }
}
