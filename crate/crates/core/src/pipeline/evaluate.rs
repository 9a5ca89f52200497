//! Scoring a detections file against a manifest.

use std::collections::HashMap;

use crate::detector::types::VehicleBox;
use crate::error::{Error, Result};
use crate::eval::{build_report, evaluate_frame, EvalReport, FrameInput, TargetPosition};
use crate::pipeline::config::RunConfig;
use crate::pipeline::dataset::FrameRecord;
use crate::pipeline::infer::DetectionRecord;
use crate::postprocess::{ipm_to_3d, CameraModel};
use crate::rect::Rect;

fn lift(knots: &[[f64; 3]], cam: &CameraModel) -> Result<Vec<[f64; 3]>> {
    knots.iter().map(|k| ipm_to_3d([k[0], k[1]], k[2], cam)).collect()
}

/// Evaluation input for one frame. Ground-truth positions for the radar
/// baseline come from each box center lifted at its labeled depth.
pub fn frame_input(gt: &FrameRecord, det: &DetectionRecord, cam: &CameraModel) -> Result<FrameInput> {
    let labels = gt.labels();
    let gt_positions = labels
        .vehicles
        .iter()
        .map(|v| {
            let (u, vv) = v.rect.center();
            let p = ipm_to_3d([u, vv], v.depth, cam)?;
            Ok(TargetPosition {
                forward: p[0],
                lateral: p[1],
                depth: v.depth,
            })
        })
        .collect::<Result<_>>()?;
    Ok(FrameInput {
        pred_vehicles: det
            .vehicles
            .iter()
            .map(|v| VehicleBox {
                rect: Rect::new(v.x1, v.y1, v.x2, v.y2),
                depth: v.depth_m,
                score: v.score,
            })
            .collect(),
        gt_vehicles: labels.vehicles,
        gt_positions,
        radar: gt.radar.clone(),
        pred_lanes: det.lanes.iter().map(|l| lift(&l.knots, cam)).collect::<Result<_>>()?,
        gt_lanes: gt
            .lanes
            .iter()
            .map(|l| Ok((l.boundary, lift(&l.knots, cam)?)))
            .collect::<Result<_>>()?,
    })
}

/// Every manifest frame must have exactly one detections line and vice versa.
pub fn run_eval(cfg: &RunConfig, records: &[FrameRecord], dets: &[DetectionRecord]) -> Result<EvalReport> {
    let mut by_id: HashMap<&str, &DetectionRecord> = HashMap::new();
    for d in dets {
        if by_id.insert(&d.frame_id, d).is_some() {
            return Err(Error::Data(format!("duplicate detections for frame {:?}", d.frame_id)));
        }
    }
    let mut frames = Vec::with_capacity(records.len());
    for r in records {
        let d = by_id
            .remove(r.frame_id.as_str())
            .ok_or_else(|| Error::Data(format!("no detections for frame {:?}", r.frame_id)))?;
        frames.push(evaluate_frame(&frame_input(r, d, &cfg.camera)?, &cfg.eval));
    }
    if let Some(extra) = by_id.keys().min() {
        return Err(Error::Data(format!("detections for unknown frame {extra:?}")));
    }
    Ok(build_report(&cfg.dataset_id, &frames, &cfg.eval))
}
