use serde::{Deserialize, Serialize};

use crate::eval::counts::{BinRecord, Counts};

/// Boundary slots scored: outer-left, ego-left, ego-right, outer-right.
pub const SLOTS: [i32; 4] = [-2, -1, 1, 2];
/// Longitudinal positions in meters ahead: 15, 20, ..., 80.
pub const DISTANCES: [f64; 14] = [
    15.0, 20.0, 25.0, 30.0, 35.0, 40.0, 45.0, 50.0, 55.0, 60.0, 65.0, 70.0, 75.0, 80.0,
];

/// Lateral (`y`) position where a vehicle-frame polyline first crosses `x`.
pub fn lateral_at(polyline: &[[f64; 3]], x: f64) -> Option<f64> {
    for w in polyline.windows(2) {
        let (p, q) = (w[0], w[1]);
        let (lo, hi) = if p[0] <= q[0] { (p[0], q[0]) } else { (q[0], p[0]) };
        if x < lo || x > hi {
            continue;
        }
        if hi == lo {
            return Some(p[1]);
        }
        let t = (x - p[0]) / (q[0] - p[0]);
        return Some(p[1] + t * (q[1] - p[1]));
    }
    None
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LaneEvalGrid {
    /// `cells[slot][distance]`, indexed like [`SLOTS`] and [`DISTANCES`].
    pub cells: [[Counts; 14]; 4],
    /// Unpaired predictions at distances where no ground truth exists.
    pub unassigned_fp: [usize; 14],
}

impl LaneEvalGrid {
    pub fn merge(&mut self, other: &LaneEvalGrid) {
        for s in 0..4 {
            for d in 0..14 {
                self.cells[s][d] += other.cells[s][d];
            }
        }
        for d in 0..14 {
            self.unassigned_fp[d] += other.unassigned_fp[d];
        }
    }

    /// Sum over the given slots and distances within `[near, far]`.
    pub fn total(&self, slots: &[i32], near: f64, far: f64) -> Counts {
        let mut c = Counts::default();
        for (si, slot) in SLOTS.iter().enumerate() {
            if !slots.contains(slot) {
                continue;
            }
            for (di, &d) in DISTANCES.iter().enumerate() {
                if d >= near && d <= far {
                    c += self.cells[si][di];
                }
            }
        }
        c
    }

    pub fn records(&self) -> Vec<BinRecord> {
        let mut out = Vec::with_capacity(56);
        for (si, slot) in SLOTS.iter().enumerate() {
            for (di, d) in DISTANCES.iter().enumerate() {
                out.push(BinRecord::new(format!("boundary{slot:+}@{d}m"), self.cells[si][di]));
            }
        }
        out
    }
}

/// Scores predicted lanes against ground-truth boundaries, both as
/// vehicle-frame polylines.
///
/// At every distance the defined lateral positions are paired greedily by
/// ascending lateral gap. A pair closer than `tol_m` is a true positive; a
/// farther pair counts one false positive and one false negative. Unpaired
/// ground truth is a false negative; an unpaired prediction is a false
/// positive charged to the nearest ground-truth slot at that distance.
pub fn lane_eval(preds: &[Vec<[f64; 3]>], gts: &[(i32, Vec<[f64; 3]>)], tol_m: f64) -> LaneEvalGrid {
    let mut grid = LaneEvalGrid::default();
    for (di, &x) in DISTANCES.iter().enumerate() {
        let g: Vec<(usize, f64)> = gts
            .iter()
            .filter_map(|(slot, line)| {
                let si = SLOTS.iter().position(|s| s == slot)?;
                Some((si, lateral_at(line, x)?))
            })
            .collect();
        let p: Vec<f64> = preds.iter().filter_map(|l| lateral_at(l, x)).collect();
        let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(g.len() * p.len());
        for (i, py) in p.iter().enumerate() {
            for (j, (_, gy)) in g.iter().enumerate() {
                pairs.push(((py - gy).abs(), i, j));
            }
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.2.cmp(&b.2)).then(a.1.cmp(&b.1)));
        let mut used_p = vec![false; p.len()];
        let mut used_g = vec![false; g.len()];
        for (gap, i, j) in pairs {
            if used_p[i] || used_g[j] {
                continue;
            }
            used_p[i] = true;
            used_g[j] = true;
            let c = &mut grid.cells[g[j].0][di];
            if gap < tol_m {
                c.tp += 1;
            } else {
                c.fp += 1;
                c.fn_ += 1;
            }
        }
        for (j, &(si, _)) in g.iter().enumerate() {
            if !used_g[j] {
                grid.cells[si][di].fn_ += 1;
            }
        }
        for (i, py) in p.iter().enumerate() {
            if used_p[i] {
                continue;
            }
            let nearest = g
                .iter()
                .min_by(|a, b| (a.1 - py).abs().total_cmp(&(b.1 - py).abs()).then(a.0.cmp(&b.0)));
            match nearest {
                Some(&(si, _)) => grid.cells[si][di].fp += 1,
                None => grid.unassigned_fp[di] += 1,
            }
        }
    }
    grid
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(y: f64, x0: f64, x1: f64) -> Vec<[f64; 3]> {
        vec![[x0, y, 0.0], [x1, y, 0.0]]
    }

    fn gts() -> Vec<(i32, Vec<[f64; 3]>)> {
        vec![
            (-2, line(5.4, 0.0, 100.0)),
            (-1, line(1.8, 0.0, 100.0)),
            (1, line(-1.8, 0.0, 100.0)),
            (2, line(-5.4, 0.0, 100.0)),
        ]
    }

    #[test]
    fn identical_is_all_tp() {
        let g = gts();
        let p: Vec<_> = g.iter().map(|(_, l)| l.clone()).collect();
        let grid = lane_eval(&p, &g, 0.5);
        assert_eq!(grid.total(&SLOTS, 0.0, 100.0), Counts::new(56, 0, 0));
    }

    #[test]
    fn offsets_around_tolerance() {
        let g = gts();
        let near: Vec<_> = g.iter().map(|(_, l)| l.iter().map(|p| [p[0], p[1] + 0.4, p[2]]).collect()).collect();
        assert_eq!(lane_eval(&near, &g, 0.5).total(&SLOTS, 0.0, 100.0), Counts::new(56, 0, 0));
        let far: Vec<_> = g.iter().map(|(_, l)| l.iter().map(|p| [p[0], p[1] + 0.6, p[2]]).collect()).collect();
        let grid = lane_eval(&far, &g, 0.5);
        for row in &grid.cells {
            for c in row {
                assert_eq!(*c, Counts::new(0, 1, 1));
            }
        }
    }

    #[test]
    fn out_of_range_is_absent() {
        let g = vec![(1, line(-1.8, 0.0, 32.0))];
        let p = vec![line(-1.8, 0.0, 100.0)];
        let grid = lane_eval(&p, &g, 0.5);
        // defined at 15..30: 4 tp; beyond, the prediction has no ground truth
        assert_eq!(grid.total(&[1], 0.0, 100.0), Counts::new(4, 0, 0));
        assert_eq!(grid.unassigned_fp.iter().sum::<usize>(), 10);
    }

    #[test]
    fn sampling_interpolates() {
        let l = vec![[10.0, 0.0, 0.0], [20.0, 2.0, 0.0], [30.0, 2.0, 0.0]];
        assert_eq!(lateral_at(&l, 15.0), Some(1.0));
        assert_eq!(lateral_at(&l, 25.0), Some(2.0));
        assert_eq!(lateral_at(&l, 31.0), None);
    }
}
