//! Frame-independent inference and the detections file.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detector::head::forward_detect;
use crate::error::{Error, Result};
use crate::nn::Network;
use crate::pipeline::config::RunConfig;
use crate::pipeline::dataset::Dataset;
use crate::pipeline::image::{image_to_tensor, read_ppm};
use crate::postprocess::{postprocess, FrameDetections};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VehicleDetection {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
    pub depth_m: f64,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LaneDetection {
    pub id: usize,
    /// `[u, v, depth_m]` spline knots.
    pub knots: Vec<[f64; 3]>,
}

/// One line of the detections file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionRecord {
    pub frame_id: String,
    pub vehicles: Vec<VehicleDetection>,
    pub lanes: Vec<LaneDetection>,
}

impl DetectionRecord {
    pub fn from_detections(frame_id: &str, d: &FrameDetections) -> Self {
        Self {
            frame_id: frame_id.to_string(),
            vehicles: d
                .vehicles
                .iter()
                .map(|v| VehicleDetection {
                    x1: v.rect.x1,
                    y1: v.rect.y1,
                    x2: v.rect.x2,
                    y2: v.rect.y2,
                    depth_m: v.depth,
                    score: v.score,
                })
                .collect(),
            lanes: d
                .lanes
                .iter()
                .map(|l| LaneDetection {
                    id: l.id,
                    knots: l.knots.clone(),
                })
                .collect(),
        }
    }
}

/// Forward pass and post-processing of one decoded image.
pub fn detect_image(net: &Network, cfg: &RunConfig, img: &image::RgbImage) -> Result<FrameDetections> {
    let geometry = cfg.geometry()?;
    let grid = forward_detect(&image_to_tensor(img), net, &geometry, &cfg.codec())?;
    postprocess(&grid, &cfg.camera, &cfg.postprocess)
}

/// Detections for every record, in manifest order.
pub fn run_infer(net: &Network, cfg: &RunConfig, ds: &Dataset) -> Result<Vec<DetectionRecord>> {
    let pool = cfg.thread_pool()?;
    pool.install(|| {
        ds.records
            .par_iter()
            .map(|r| {
                let img = read_ppm(&ds.image_path(r))?;
                let d = detect_image(net, cfg, &img)?;
                Ok(DetectionRecord::from_detections(&r.frame_id, &d))
            })
            .collect()
    })
}

pub fn write_detections(path: &Path, records: &[DetectionRecord]) -> Result<()> {
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(f);
    for r in records {
        let line = serde_json::to_string(r).expect("detections serialize");
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_detections(path: &Path) -> Result<Vec<DetectionRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let r = serde_json::from_str(line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(r);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schema_field_names() {
        let r = DetectionRecord {
            frame_id: "f0".into(),
            vehicles: vec![VehicleDetection {
                x1: 1.0,
                y1: 2.0,
                x2: 3.0,
                y2: 4.0,
                depth_m: 10.0,
                score: 0.9,
            }],
            lanes: vec![LaneDetection {
                id: 0,
                knots: vec![[1.0, 2.0, 3.0]],
            }],
        };
        let v: serde_json::Value = serde_json::to_value(&r).unwrap();
        let keys = |o: &serde_json::Value| {
            let mut k: Vec<String> = o.as_object().unwrap().keys().cloned().collect();
            k.sort();
            k
        };
        assert_eq!(keys(&v), ["frame_id", "lanes", "vehicles"]);
        assert_eq!(keys(&v["vehicles"][0]), ["depth_m", "score", "x1", "x2", "y1", "y2"]);
        assert_eq!(keys(&v["lanes"][0]), ["id", "knots"]);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.jsonl");
        write_detections(&p, &[r.clone(), r.clone()]).unwrap();
        assert_eq!(read_detections(&p).unwrap(), vec![r.clone(), r]);
        std::fs::write(&p, "{}\n").unwrap();
        assert!(matches!(read_detections(&p), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn empty_dataset_gives_empty_output() {
        let cfg = RunConfig::desk();
        let (net, _) = crate::pipeline::train::init_training(&cfg).unwrap();
        let out = run_infer(&net, &cfg, &Dataset::default()).unwrap();
        assert!(out.is_empty());
    }
}
