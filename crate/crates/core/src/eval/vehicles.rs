use serde::{Deserialize, Serialize};

use crate::detector::types::VehicleBox;
use crate::eval::counts::{BinRecord, Counts};
use crate::rect::Rect;

pub fn iou(a: &Rect, b: &Rect) -> f64 {
    a.iou(b)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Tp,
    Fp,
    Fn,
}

/// One scored detection or miss with the depth it is binned by.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scored {
    pub outcome: Outcome,
    /// Ground-truth depth for tp / fn, predicted depth for fp.
    pub depth: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct VehicleMatches {
    /// `(pred, gt, iou)` in the order they were accepted.
    pub pairs: Vec<(usize, usize, f64)>,
    pub unmatched_preds: Vec<usize>,
    pub unmatched_gts: Vec<usize>,
    pub scored: Vec<Scored>,
}

impl VehicleMatches {
    pub fn counts(&self) -> Counts {
        Counts::new(self.pairs.len(), self.unmatched_preds.len(), self.unmatched_gts.len())
    }
}

/// Greedy one-to-one matching in descending IOU order; ties go to the lower
/// ground-truth index, then the lower prediction index.
pub fn match_vehicles(preds: &[VehicleBox], gts: &[VehicleBox], iou_min: f64) -> VehicleMatches {
    let mut cand = Vec::new();
    for (i, p) in preds.iter().enumerate() {
        for (j, g) in gts.iter().enumerate() {
            let v = iou(&p.rect, &g.rect);
            if v >= iou_min && v > 0.0 {
                cand.push((i, j, v));
            }
        }
    }
    cand.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.1.cmp(&b.1)).then(a.0.cmp(&b.0)));
    let mut used_p = vec![false; preds.len()];
    let mut used_g = vec![false; gts.len()];
    let mut out = VehicleMatches::default();
    for (i, j, v) in cand {
        if !used_p[i] && !used_g[j] {
            used_p[i] = true;
            used_g[j] = true;
            out.pairs.push((i, j, v));
        }
    }
    out.unmatched_preds = (0..preds.len()).filter(|&i| !used_p[i]).collect();
    out.unmatched_gts = (0..gts.len()).filter(|&j| !used_g[j]).collect();
    for &(_, j, _) in &out.pairs {
        out.scored.push(Scored {
            outcome: Outcome::Tp,
            depth: gts[j].depth,
        });
    }
    for &i in &out.unmatched_preds {
        out.scored.push(Scored {
            outcome: Outcome::Fp,
            depth: preds[i].depth,
        });
    }
    for &j in &out.unmatched_gts {
        out.scored.push(Scored {
            outcome: Outcome::Fn,
            depth: gts[j].depth,
        });
    }
    out
}

pub fn depth_bin(depth: f64, width: f64) -> usize {
    (depth.max(0.0) / width).floor() as usize
}

pub fn bin_label(bin: usize, width: f64) -> String {
    format!("{}-{}m", bin as f64 * width, (bin + 1) as f64 * width)
}

/// Per depth bin counts; bins with no entries are omitted.
pub fn vehicle_report_by_depth(scored: &[Scored], bin_width_m: f64) -> Vec<BinRecord> {
    let mut bins: std::collections::BTreeMap<usize, Counts> = Default::default();
    for s in scored {
        let c = bins.entry(depth_bin(s.depth, bin_width_m)).or_default();
        match s.outcome {
            Outcome::Tp => c.tp += 1,
            Outcome::Fp => c.fp += 1,
            Outcome::Fn => c.fn_ += 1,
        }
    }
    bins.into_iter()
        .map(|(b, c)| BinRecord::new(bin_label(b, bin_width_m), c))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthBin {
    pub bin_id: String,
    pub n: usize,
    pub mean_error: f64,
    /// Sample standard deviation over sqrt(n); absent below two samples.
    pub stderr: Option<f64>,
    /// Set when the bin has too few samples for a standard error.
    pub flagged: bool,
}

/// Standard error of `pred - true` depth per ground-truth depth bin.
pub fn depth_error_stats(pairs: &[(f64, f64)], bin_width_m: f64) -> Vec<DepthBin> {
    let mut bins: std::collections::BTreeMap<usize, Vec<f64>> = Default::default();
    for &(pred, truth) in pairs {
        bins.entry(depth_bin(truth, bin_width_m)).or_default().push(pred - truth);
    }
    bins.into_iter()
        .map(|(b, e)| {
            let n = e.len();
            let mean = e.iter().sum::<f64>() / n as f64;
            let stderr = (n >= 2).then(|| {
                let var = e.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
                var.sqrt() / (n as f64).sqrt()
            });
            DepthBin {
                bin_id: bin_label(b, bin_width_m),
                n,
                mean_error: mean,
                stderr,
                flagged: stderr.is_none(),
            }
        })
        .collect()
}
