use serde::{Deserialize, Serialize};

use crate::detector::types::VehicleBox;
use crate::eval::counts::{BinRecord, Counts};
use crate::eval::lanes::{lane_eval, LaneEvalGrid};
use crate::eval::radar::{radar_baseline, RadarReturn, TargetPosition};
use crate::eval::vehicles::{depth_error_stats, match_vehicles, vehicle_report_by_depth, DepthBin, Scored};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalParams {
    pub iou_min: f64,
    pub lane_tol_m: f64,
    pub depth_bin_m: f64,
    /// Range over which the ego-lane summary is aggregated.
    pub ego_range_m: [f64; 2],
}

impl Default for EvalParams {
    fn default() -> Self {
        Self {
            iou_min: 0.5,
            lane_tol_m: 0.5,
            depth_bin_m: 10.0,
            ego_range_m: [15.0, 50.0],
        }
    }
}

/// Everything needed to score one frame.
#[derive(Debug, Clone, Default)]
pub struct FrameInput {
    pub pred_vehicles: Vec<VehicleBox>,
    pub gt_vehicles: Vec<VehicleBox>,
    /// One entry per ground-truth vehicle, same order.
    pub gt_positions: Vec<TargetPosition>,
    pub radar: Vec<RadarReturn>,
    pub pred_lanes: Vec<Vec<[f64; 3]>>,
    pub gt_lanes: Vec<(i32, Vec<[f64; 3]>)>,
}

/// Per-frame partial results; merging is order-independent for the counts.
#[derive(Debug, Clone, Default)]
pub struct FrameEval {
    pub scored: Vec<Scored>,
    pub depth_pairs: Vec<(f64, f64)>,
    pub radar: (Vec<RadarReturn>, Vec<TargetPosition>),
    pub lanes: LaneEvalGrid,
}

pub fn evaluate_frame(f: &FrameInput, params: &EvalParams) -> FrameEval {
    let m = match_vehicles(&f.pred_vehicles, &f.gt_vehicles, params.iou_min);
    FrameEval {
        depth_pairs: m
            .pairs
            .iter()
            .map(|&(i, j, _)| (f.pred_vehicles[i].depth, f.gt_vehicles[j].depth))
            .collect(),
        scored: m.scored,
        radar: (f.radar.clone(), f.gt_positions.clone()),
        lanes: lane_eval(&f.pred_lanes, &f.gt_lanes, params.lane_tol_m),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMeta {
    pub dataset_id: String,
    pub frames: usize,
    pub params: EvalParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub metadata: ReportMeta,
    pub vehicle_summary: BinRecord,
    pub vehicle_bins: Vec<BinRecord>,
    pub depth_bins: Vec<DepthBin>,
    pub radar_summary: BinRecord,
    pub radar_bins: Vec<BinRecord>,
    pub lane_summary: BinRecord,
    pub ego_lane_summary: BinRecord,
    pub lane_positions: Vec<BinRecord>,
    pub lane_unassigned_fp: usize,
}

/// Folds frame results in the given order into a report.
pub fn build_report(dataset_id: &str, frames: &[FrameEval], params: &EvalParams) -> EvalReport {
    let scored: Vec<Scored> = frames.iter().flat_map(|f| f.scored.iter().copied()).collect();
    let depth_pairs: Vec<(f64, f64)> = frames.iter().flat_map(|f| f.depth_pairs.iter().copied()).collect();
    let radar_frames: Vec<_> = frames.iter().map(|f| f.radar.clone()).collect();
    let mut lanes = LaneEvalGrid::default();
    for f in frames {
        lanes.merge(&f.lanes);
    }
    let vehicle_bins = vehicle_report_by_depth(&scored, params.depth_bin_m);
    let vehicle_total: Counts = vehicle_bins.iter().map(BinRecord::counts).sum();
    let (radar_bins, radar_summary) = radar_baseline(&radar_frames, params.depth_bin_m);
    let all = crate::eval::lanes::SLOTS;
    let [near, far] = params.ego_range_m;
    EvalReport {
        metadata: ReportMeta {
            dataset_id: dataset_id.to_string(),
            frames: frames.len(),
            params: *params,
        },
        vehicle_summary: BinRecord::new("all", vehicle_total),
        vehicle_bins,
        depth_bins: depth_error_stats(&depth_pairs, params.depth_bin_m),
        radar_summary,
        radar_bins,
        lane_summary: BinRecord::new("all", lanes.total(&all, f64::NEG_INFINITY, f64::INFINITY)),
        ego_lane_summary: BinRecord::new(format!("ego@{near}-{far}m"), lanes.total(&[-1, 1], near, far)),
        lane_positions: lanes.records(),
        lane_unassigned_fp: lanes.unassigned_fp.iter().sum(),
    }
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    /// One row per bin or position: `section,bin_id,tp,fp,fn,precision,recall,f1`.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["section", "bin_id", "tp", "fp", "fn", "precision", "recall", "f1"])
            .expect("in-memory write");
        let mut row = |section: &str, r: &BinRecord| {
            w.write_record([
                section.to_string(),
                r.bin_id.clone(),
                r.tp.to_string(),
                r.fp.to_string(),
                r.fn_.to_string(),
                r.precision.to_string(),
                r.recall.to_string(),
                r.f1.to_string(),
            ])
            .expect("in-memory write");
        };
        row("vehicle", &self.vehicle_summary);
        for r in &self.vehicle_bins {
            row("vehicle_depth", r);
        }
        row("radar", &self.radar_summary);
        for r in &self.radar_bins {
            row("radar_depth", r);
        }
        row("lane", &self.lane_summary);
        row("ego_lane", &self.ego_lane_summary);
        for r in &self.lane_positions {
            row("lane_position", r);
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rect::Rect;

    #[test]
    fn recomputed_metrics_match() {
        let gt = VehicleBox::truth(Rect::new(0.0, 0.0, 20.0, 20.0), 12.0);
        let far = VehicleBox::truth(Rect::new(100.0, 0.0, 110.0, 10.0), 33.0);
        let f = FrameInput {
            pred_vehicles: vec![gt],
            gt_vehicles: vec![gt, far],
            ..FrameInput::default()
        };
        let p = EvalParams::default();
        let r = build_report("t", &[evaluate_frame(&f, &p)], &p);
        assert_eq!(r.vehicle_summary.counts(), Counts::new(1, 0, 1));
        for b in r.vehicle_bins.iter().chain([&r.vehicle_summary]) {
            let c = b.counts();
            assert_eq!(b.precision, c.precision());
            assert_eq!(b.recall, c.recall());
            assert_eq!(b.f1, c.f1());
        }
        assert_eq!(r.vehicle_bins.len(), 2);
        let csv = r.to_csv();
        assert!(csv.starts_with("section,bin_id,tp,fp,fn,precision,recall,f1\n"));
        assert_eq!(csv.lines().count(), 1 + 1 + 2 + 1 + 1 + 1 + 56);
    }
}
