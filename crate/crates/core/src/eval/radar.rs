use serde::{Deserialize, Serialize};

use crate::eval::counts::{BinRecord, Counts};
use crate::eval::vehicles::{bin_label, depth_bin};

/// A radar target in the vehicle frame: meters ahead and meters to the left.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadarReturn {
    pub forward: f64,
    pub lateral: f64,
}


/// Ground-truth vehicle position in the same frame as [`RadarReturn`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetPosition {
    pub forward: f64,
    pub lateral: f64,
    /// Depth used for binning.
    pub depth: f64,
}

/// Recall-only radar comparison for one frame: every return is credited to
/// its nearest ground-truth vehicle regardless of overlap, so there are no
/// false positives. Returns the counts (fp always 0) and, per target,
/// whether some return was assigned to it.
pub fn radar_match(returns: &[RadarReturn], gts: &[TargetPosition]) -> (Counts, Vec<bool>) {
    let mut covered = vec![false; gts.len()];
    for r in returns {
        let nearest = gts
            .iter()
            .enumerate()
            .map(|(j, g)| (j, (g.forward - r.forward).hypot(g.lateral - r.lateral)))
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        if let Some((j, _)) = nearest {
            covered[j] = true;
        }
    }
    let tp = covered.iter().filter(|&&c| c).count();
    (Counts::new(tp, 0, gts.len() - tp), covered)
}

/// Per depth-bin radar rows over many frames plus the overall row.
pub fn radar_baseline(frames: &[(Vec<RadarReturn>, Vec<TargetPosition>)], bin_width_m: f64) -> (Vec<BinRecord>, BinRecord) {
    let mut bins: std::collections::BTreeMap<usize, Counts> = Default::default();
    let mut total = Counts::default();
    for (returns, gts) in frames {
        let (c, covered) = radar_match(returns, gts);
        total += c;
        for (g, hit) in gts.iter().zip(covered) {
            let b = bins.entry(depth_bin(g.depth, bin_width_m)).or_default();
            if hit {
                b.tp += 1;
            } else {
                b.fn_ += 1;
            }
        }
    }
    let rows = bins
        .into_iter()
        .map(|(b, c)| BinRecord::recall_only(bin_label(b, bin_width_m), c))
        .collect();
    (rows, BinRecord::recall_only("all", total))
}
