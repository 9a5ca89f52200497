use crate::autolabel::filter::BoundaryPoint;
use crate::autolabel::types::{BoundaryPolyline, Side, Trajectory};
use crate::error::{Error, Result};

fn median(v: &mut [f64]) -> f64 {
    v.sort_unstable_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Piecewise-linear boundary along the trajectory.
///
/// Points are binned by arc length; each bin contributes one knot at its
/// center, placed at the median lateral offset (and median height) of its
/// points. Empty interior bins are interpolated from their neighbors; more
/// than half the bins empty is an error.
pub fn fit_boundary(
    points: &[BoundaryPoint],
    traj: &Trajectory,
    side: Side,
    knot_spacing_m: f64,
) -> Result<BoundaryPolyline> {
    if !(knot_spacing_m.is_finite() && knot_spacing_m > 0.0) {
        return Err(Error::config(format!("knot spacing {knot_spacing_m} must be positive")));
    }
    if points.is_empty() {
        return Err(Error::BoundaryNotFound(side.name()));
    }
    let (lo, hi) = points
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.s), b.max(p.s)));
    let first = (lo / knot_spacing_m).floor() as i64;
    let last = (hi / knot_spacing_m).floor() as i64;
    let nbins = (last - first + 1) as usize;
    let mut lat: Vec<Vec<f64>> = vec![Vec::new(); nbins];
    let mut hgt: Vec<Vec<f64>> = vec![Vec::new(); nbins];
    for p in points {
        let b = ((p.s / knot_spacing_m).floor() as i64 - first) as usize;
        lat[b.min(nbins - 1)].push(p.d);
        hgt[b.min(nbins - 1)].push(p.h);
    }
    let empty = lat.iter().filter(|b| b.is_empty()).count();
    if empty * 2 > nbins {
        return Err(Error::Data(format!(
            "{} boundary fit: {empty} of {nbins} bins are empty",
            side.name()
        )));
    }
    let mut knots: Vec<Option<(f64, f64)>> = lat
        .iter_mut()
        .zip(hgt.iter_mut())
        .map(|(l, h)| (!l.is_empty()).then(|| (median(l), median(h))))
        .collect();
    // first and last bins hold the extreme points, so only interior gaps remain
    let filled: Vec<usize> = (0..nbins).filter(|&i| knots[i].is_some()).collect();
    for w in filled.windows(2) {
        let (a, b) = (w[0], w[1]);
        let (la, ha) = knots[a].unwrap();
        let (lb, hb) = knots[b].unwrap();
        for i in a + 1..b {
            let f = (i - a) as f64 / (b - a) as f64;
            knots[i] = Some((la + f * (lb - la), ha + f * (hb - ha)));
        }
    }
    let points = knots
        .iter()
        .enumerate()
        .map(|(i, k)| {
            let (d, h) = k.unwrap();
            let s = (first + i as i64) as f64 * knot_spacing_m + knot_spacing_m / 2.0;
            let s = s.clamp(lo, hi);
            let mut p = traj.point_at(s, d);
            p[2] += h;
            p
        })
        .collect();
    Ok(BoundaryPolyline {
        side,
        offset_index: 0,
        points,
    })
}
