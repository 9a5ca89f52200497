use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Distance used to cluster lane segments lifted to 3D.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SegmentMetric {
    /// Euclidean distance between segment midpoints.
    #[default]
    Midpoint,
    /// Closest approach between the two segments.
    Segment,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DbscanParams {
    pub eps_m: f64,
    pub min_pts: usize,
    #[serde(default)]
    pub metric: SegmentMetric,
}

impl Default for DbscanParams {
    fn default() -> Self {
        Self {
            eps_m: 2.0,
            min_pts: 3,
            metric: SegmentMetric::Midpoint,
        }
    }
}

impl DbscanParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps_m.is_finite() && self.eps_m > 0.0) || self.min_pts == 0 {
            return Err(Error::config(format!("invalid DBSCAN parameters {self:?}")));
        }
        Ok(())
    }
}

/// A 3D segment in the vehicle frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment3 {
    pub a: [f64; 3],
    pub b: [f64; 3],
}

impl Segment3 {
    pub fn midpoint(&self) -> [f64; 3] {
        [
            (self.a[0] + self.b[0]) / 2.0,
            (self.a[1] + self.b[1]) / 2.0,
            (self.a[2] + self.b[2]) / 2.0,
        ]
    }

    pub fn half_length(&self) -> f64 {
        dist(self.a, self.b) / 2.0
    }
}

pub fn dist(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn lerp(a: [f64; 3], d: [f64; 3], t: f64) -> [f64; 3] {
    [a[0] + t * d[0], a[1] + t * d[1], a[2] + t * d[2]]
}

/// Minimum distance between two closed segments.
pub fn segment_distance(p: &Segment3, q: &Segment3) -> f64 {
    let d1 = sub(p.b, p.a);
    let d2 = sub(q.b, q.a);
    let r = sub(p.a, q.a);
    let (a, e, f) = (dot(d1, d1), dot(d2, d2), dot(d2, r));
    let eps = 1e-15;
    let (s, t);
    if a <= eps && e <= eps {
        return dist(p.a, q.a);
    }
    if a <= eps {
        s = 0.0;
        t = (f / e).clamp(0.0, 1.0);
    } else {
        let c = dot(d1, r);
        if e <= eps {
            t = 0.0;
            s = (-c / a).clamp(0.0, 1.0);
        } else {
            let b = dot(d1, d2);
            let denom = a * e - b * b;
            let mut s0 = if denom > eps { ((b * f - c * e) / denom).clamp(0.0, 1.0) } else { 0.0 };
            let mut t0 = (b * s0 + f) / e;
            if t0 < 0.0 {
                t0 = 0.0;
                s0 = (-c / a).clamp(0.0, 1.0);
            } else if t0 > 1.0 {
                t0 = 1.0;
                s0 = ((b - c) / a).clamp(0.0, 1.0);
            }
            s = s0;
            t = t0;
        }
    }
    dist(lerp(p.a, d1, s), lerp(q.a, d2, t))
}

/// DBSCAN over an abstract neighborhood function.
///
/// `neighbors(i)` must return every `j` (including `i`) within eps of `i`,
/// with its distance. A point is core when it has at least `min_pts`
/// neighbors counting itself. Clusters are the connected components of core
/// points; a border point joins the cluster of its nearest core neighbor
/// (lower index on ties), which keeps the result independent of visiting
/// order. Labels are numbered by first appearance in index order.
pub fn dbscan_with<F>(n: usize, min_pts: usize, mut neighbors: F) -> Vec<Option<usize>>
where
    F: FnMut(usize) -> Vec<(usize, f64)>,
{
    let hoods: Vec<Vec<(usize, f64)>> = (0..n).map(&mut neighbors).collect();
    let core: Vec<bool> = hoods.iter().map(|h| h.len() >= min_pts).collect();
    let mut comp = vec![usize::MAX; n];
    let mut ncomp = 0;
    for start in 0..n {
        if !core[start] || comp[start] != usize::MAX {
            continue;
        }
        comp[start] = ncomp;
        let mut stack = vec![start];
        while let Some(i) = stack.pop() {
            for &(j, _) in &hoods[i] {
                if core[j] && comp[j] == usize::MAX {
                    comp[j] = ncomp;
                    stack.push(j);
                }
            }
        }
        ncomp += 1;
    }
    let mut raw = comp.clone();
    for i in 0..n {
        if core[i] {
            continue;
        }
        raw[i] = hoods[i]
            .iter()
            .filter(|(j, _)| core[*j])
            .min_by(|x, y| x.1.total_cmp(&y.1).then(x.0.cmp(&y.0)))
            .map_or(usize::MAX, |(j, _)| comp[*j]);
    }
    let mut rename = vec![usize::MAX; ncomp];
    let mut next = 0;
    raw.iter()
        .map(|&c| {
            (c != usize::MAX).then(|| {
                if rename[c] == usize::MAX {
                    rename[c] = next;
                    next += 1;
                }
                rename[c]
            })
        })
        .collect()
}

/// Uniform hash grid over 3D points with cell size `cell`.
struct PointGrid {
    cell: f64,
    bins: HashMap<[i64; 3], Vec<usize>>,
}

impl PointGrid {
    fn new(points: &[[f64; 3]], cell: f64) -> Self {
        let mut bins: HashMap<[i64; 3], Vec<usize>> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            bins.entry(Self::key(p, cell)).or_default().push(i);
        }
        Self { cell, bins }
    }

    fn key(p: &[f64; 3], cell: f64) -> [i64; 3] {
        p.map(|v| (v / cell).floor() as i64)
    }

    /// Candidates within `radius` (a superset; caller filters by exact distance).
    fn candidates(&self, p: &[f64; 3], radius: f64, out: &mut Vec<usize>) {
        out.clear();
        let reach = (radius / self.cell).ceil() as i64;
        let k = Self::key(p, self.cell);
        for dx in -reach..=reach {
            for dy in -reach..=reach {
                for dz in -reach..=reach {
                    if let Some(v) = self.bins.get(&[k[0] + dx, k[1] + dy, k[2] + dz]) {
                        out.extend_from_slice(v);
                    }
                }
            }
        }
        out.sort_unstable();
    }
}

/// DBSCAN over 3D points. `None` marks noise.
pub fn dbscan_points(points: &[[f64; 3]], eps: f64, min_pts: usize) -> Vec<Option<usize>> {
    let grid = PointGrid::new(points, eps);
    let mut buf = Vec::new();
    dbscan_with(points.len(), min_pts, |i| {
        grid.candidates(&points[i], eps, &mut buf);
        buf.iter()
            .map(|&j| (j, dist(points[i], points[j])))
            .filter(|&(_, d)| d <= eps)
            .collect()
    })
}

/// Clusters lane segments in the vehicle frame.
pub fn dbscan_segments(segments: &[Segment3], params: &DbscanParams) -> Vec<Option<usize>> {
    match params.metric {
        SegmentMetric::Midpoint => {
            let mids: Vec<_> = segments.iter().map(Segment3::midpoint).collect();
            dbscan_points(&mids, params.eps_m, params.min_pts)
        }
        SegmentMetric::Segment => {
            // segment distance >= midpoint distance - both half lengths
            let mids: Vec<_> = segments.iter().map(Segment3::midpoint).collect();
            let hmax = segments.iter().map(Segment3::half_length).fold(0.0, f64::max);
            let radius = params.eps_m + 2.0 * hmax;
            let grid = PointGrid::new(&mids, params.eps_m.max(radius / 4.0));
            let mut buf = Vec::new();
            dbscan_with(segments.len(), params.min_pts, |i| {
                grid.candidates(&mids[i], radius, &mut buf);
                buf.iter()
                    .map(|&j| (j, segment_distance(&segments[i], &segments[j])))
                    .filter(|&(_, d)| d <= params.eps_m)
                    .collect()
            })
        }
    }
}
