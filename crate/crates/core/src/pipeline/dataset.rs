//! JSON-lines dataset manifests.

use std::collections::HashSet;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::autolabel::{FrameLabels, Pose};
use crate::detector::types::{LanePolyline, VehicleBox};
use crate::error::{Error, Result};
use crate::eval::RadarReturn;
use crate::rect::Rect;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VehicleLabel {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
    pub depth_m: f64,
}

/// One annotated frame. `image` is relative to the manifest's directory
/// unless absolute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameRecord {
    pub frame_id: String,
    pub image: PathBuf,
    #[serde(default = "default_camera")]
    pub camera_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pose: Option<Pose>,
    #[serde(default)]
    pub vehicles: Vec<VehicleLabel>,
    #[serde(default)]
    pub lanes: Vec<LanePolyline>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub radar: Vec<RadarReturn>,
}

fn default_camera() -> String {
    "front".into()
}

impl FrameRecord {
    pub fn labels(&self) -> FrameLabels {
        FrameLabels {
            vehicles: self
                .vehicles
                .iter()
                .map(|v| VehicleBox::truth(Rect::new(v.x1, v.y1, v.x2, v.y2), v.depth_m))
                .collect(),
            lanes: self.lanes.clone(),
        }
    }

    pub fn set_labels(&mut self, labels: &FrameLabels) {
        self.vehicles = labels
            .vehicles
            .iter()
            .map(|v| VehicleLabel {
                x1: v.rect.x1,
                y1: v.rect.y1,
                x2: v.rect.x2,
                y2: v.rect.y2,
                depth_m: v.depth,
            })
            .collect();
        self.lanes = labels.lanes.clone();
    }

    /// Structural checks that need no filesystem access.
    pub fn check(&self) -> std::result::Result<(), String> {
        if self.frame_id.is_empty() {
            return Err("empty frame_id".into());
        }
        for (i, v) in self.vehicles.iter().enumerate() {
            if !Rect::new(v.x1, v.y1, v.x2, v.y2).is_valid() {
                return Err(format!("vehicle {i}: invalid rectangle"));
            }
            if !(v.depth_m.is_finite() && v.depth_m > 0.0) {
                return Err(format!("vehicle {i}: depth must be positive"));
            }
        }
        for (i, l) in self.lanes.iter().enumerate() {
            if l.knots.len() < 2 {
                return Err(format!("lane {i}: fewer than two knots"));
            }
            if l.knots.iter().any(|k| !(k[0].is_finite() && k[1].is_finite() && k[2].is_finite() && k[2] > 0.0)) {
                return Err(format!("lane {i}: knots need finite pixels and positive depth"));
            }
            if !l.occluded.is_empty() && l.occluded.len() != l.knots.len() {
                return Err(format!("lane {i}: occlusion flags do not match knots"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    /// Directory relative image paths resolve against.
    pub root: PathBuf,
    pub records: Vec<FrameRecord>,
}

impl Dataset {
    pub fn image_path(&self, r: &FrameRecord) -> PathBuf {
        self.root.join(&r.image)
    }
}

/// Reads and validates a manifest: one record per non-blank line, unique
/// frame ids, existing image files.
pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let mut records = Vec::new();
    let mut ids = HashSet::new();
    let err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let r: FrameRecord = serde_json::from_str(raw).map_err(|e| err(line, e.to_string()))?;
        r.check().map_err(|m| err(line, m))?;
        if !ids.insert(r.frame_id.clone()) {
            return Err(err(line, format!("duplicate frame_id {:?}", r.frame_id)));
        }
        if !root.join(&r.image).is_file() {
            return Err(err(line, format!("image {} does not exist", r.image.display())));
        }
        records.push(r);
    }
    Ok(Dataset { root, records })
}

pub fn write_manifest(path: &Path, records: &[FrameRecord]) -> Result<()> {
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(f);
    for r in records {
        let line = serde_json::to_string(r).expect("record serializes");
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(id: &str) -> FrameRecord {
        FrameRecord {
            frame_id: id.into(),
            image: "img.ppm".into(),
            camera_id: "front".into(),
            pose: Some(Pose {
                t: 0.5,
                x: 1.0,
                y: 2.0,
                z: 0.0,
                heading: 0.1,
            }),
            vehicles: vec![VehicleLabel {
                x1: 1.0,
                y1: 2.0,
                x2: 30.5,
                y2: 20.25,
                depth_m: 14.125,
            }],
            lanes: vec![LanePolyline {
                boundary: 1,
                knots: vec![[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]],
                occluded: vec![false, true],
            }],
            radar: vec![RadarReturn {
                forward: 14.0,
                lateral: -3.5,
            }],
        }
    }

    #[test]
    fn empty_and_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let m = dir.path().join("m.jsonl");
        std::fs::write(&m, "").unwrap();
        assert!(load_dataset(&m).unwrap().records.is_empty());
        std::fs::write(dir.path().join("img.ppm"), b"P6\n1 1\n255\n\0\0\0").unwrap();
        let recs = vec![record("a"), record("b")];
        write_manifest(&m, &recs).unwrap();
        assert_eq!(load_dataset(&m).unwrap().records, recs);
    }

    #[test]
    fn errors_name_the_line() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("img.ppm"), b"P6\n1 1\n255\n\0\0\0").unwrap();
        let m = dir.path().join("m.jsonl");
        let good = serde_json::to_string(&record("a")).unwrap();
        let cases = [
            format!("{good}\n{{not json\n"),
            format!("{good}\n{}\n", good.replace("14.125", "-1")),
            format!("{good}\n{good}\n"),
            format!("{good}\n{}\n", good.replace("img.ppm", "missing.ppm")),
            format!("{good}\n{}\n", good.replace("\"camera_id\"", "\"extra\":1,\"camera_id\"")),
        ];
        for text in cases {
            std::fs::write(&m, text).unwrap();
            match load_dataset(&m) {
                Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
                other => panic!("expected a line-2 error, got {other:?}"),
            }
        }
    }
}
