//! Manual fixes to auto-labeled boundaries, supplied as a JSON file.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::autolabel::types::BoundaryPolyline;
use crate::error::{Error, Result};

/// Replaces one knot. `boundary_id` indexes the left-to-right boundary list.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KnotCorrection {
    pub boundary_id: usize,
    pub knot_index: usize,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

pub fn load_corrections(path: &Path) -> Result<Vec<KnotCorrection>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        message: e.to_string(),
    })
}

/// Applies all corrections, validating every index first so a bad file
/// leaves the boundaries untouched.
pub fn apply_corrections(boundaries: &mut [BoundaryPolyline], fixes: &[KnotCorrection]) -> Result<()> {
    for (i, f) in fixes.iter().enumerate() {
        let ok = boundaries
            .get(f.boundary_id)
            .is_some_and(|b| f.knot_index < b.points.len());
        if !ok || ![f.x, f.y, f.z].iter().all(|v| v.is_finite()) {
            return Err(Error::Data(format!(
                "correction {i} refers to boundary {} knot {} which does not exist",
                f.boundary_id, f.knot_index
            )));
        }
    }
    for f in fixes {
        boundaries[f.boundary_id].points[f.knot_index] = [f.x, f.y, f.z];
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autolabel::types::Side;

    #[test]
    fn applies_and_validates() {
        let mut b = vec![BoundaryPolyline {
            side: Side::Left,
            offset_index: 0,
            points: vec![[0.0; 3]; 3],
        }];
        let fix: Vec<KnotCorrection> =
            serde_json::from_str(r#"[{"boundary_id":0,"knot_index":1,"x":1.0,"y":2.0,"z":0.0}]"#).unwrap();
        apply_corrections(&mut b, &fix).unwrap();
        assert_eq!(b[0].points[1], [1.0, 2.0, 0.0]);
        let bad = [KnotCorrection {
            boundary_id: 3,
            ..fix[0]
        }];
        assert!(apply_corrections(&mut b, &bad).is_err());
    }
}
