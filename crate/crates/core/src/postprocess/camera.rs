use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pinhole camera mounted `height` meters above the vehicle origin, pitched
/// down by `pitch` radians.
///
/// Camera frame: X right, Y down, Z along the optical axis. "Depth" is always
/// camera Z. Vehicle frame: x forward, y left, z up, with the camera at
/// `(0, 0, height)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraModel {
    pub focal: f64,
    pub cx: f64,
    pub cy: f64,
    pub height: f64,
    #[serde(default)]
    pub pitch: f64,
}

impl CameraModel {
    pub fn validate(&self) -> Result<()> {
        let ok = self.focal.is_finite()
            && self.focal > 0.0
            && self.height.is_finite()
            && self.height > 0.0
            && self.cx.is_finite()
            && self.cy.is_finite()
            && self.pitch.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::config(format!("invalid camera model {self:?}")))
        }
    }

    /// Camera axes (right, down, forward) expressed in the vehicle frame.
    fn axes(&self) -> ([f64; 3], [f64; 3], [f64; 3]) {
        let (s, c) = self.pitch.sin_cos();
        ([0.0, -1.0, 0.0], [-s, 0.0, -c], [c, 0.0, -s])
    }

    /// Vehicle-frame point to camera coordinates.
    pub fn to_camera(&self, p: [f64; 3]) -> [f64; 3] {
        let (r, d, f) = self.axes();
        let q = [p[0], p[1], p[2] - self.height];
        [dot(r, q), dot(d, q), dot(f, q)]
    }

    pub fn from_camera(&self, c: [f64; 3]) -> [f64; 3] {
        let (r, d, f) = self.axes();
        let mut p = [0.0; 3];
        for i in 0..3 {
            p[i] = c[0] * r[i] + c[1] * d[i] + c[2] * f[i];
        }
        p[2] += self.height;
        p
    }

    /// Pixel `(u, v)` and depth of a vehicle-frame point, `None` behind the camera.
    pub fn project(&self, p: [f64; 3]) -> Option<(f64, f64, f64)> {
        let c = self.to_camera(p);
        (c[2] > 1e-9).then(|| {
            (
                self.cx + self.focal * c[0] / c[2],
                self.cy + self.focal * c[1] / c[2],
                c[2],
            )
        })
    }

    /// Depth at which the ray through `(u, v)` meets the ground plane `z = 0`.
    pub fn ground_depth(&self, u: f64, v: f64) -> Option<f64> {
        let (r, d, f) = self.axes();
        let (x, y) = ((u - self.cx) / self.focal, (v - self.cy) / self.focal);
        // z component of the ray direction per unit depth
        let dz = x * r[2] + y * d[2] + f[2];
        (dz < -1e-12).then(|| -self.height / dz)
    }
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Back-projects a pixel at a known depth into the vehicle frame.
pub fn ipm_to_3d(pixel: [f64; 2], depth: f64, cam: &CameraModel) -> Result<[f64; 3]> {
    if !(depth.is_finite() && depth > 0.0) || !pixel.iter().all(|v| v.is_finite()) {
        return Err(Error::Domain(format!(
            "cannot back-project pixel {pixel:?} at depth {depth}"
        )));
    }
    let x = (pixel[0] - cam.cx) / cam.focal * depth;
    let y = (pixel[1] - cam.cy) / cam.focal * depth;
    Ok(cam.from_camera([x, y, depth]))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cam(pitch: f64) -> CameraModel {
        CameraModel {
            focal: 800.0,
            cx: 320.0,
            cy: 240.0,
            height: 1.5,
            pitch,
        }
    }

    #[test]
    fn principal_point_lies_on_axis() {
        let p = ipm_to_3d([320.0, 240.0], 25.0, &cam(0.0)).unwrap();
        assert!((p[0] - 25.0).abs() < 1e-12 && p[1].abs() < 1e-12 && (p[2] - 1.5).abs() < 1e-12);
    }

    #[test]
    fn one_focal_length_right() {
        let p = ipm_to_3d([1120.0, 240.0], 30.0, &cam(0.0)).unwrap();
        assert!((p[1] + 30.0).abs() < 1e-12, "{p:?}");
    }

    #[test]
    fn non_positive_depth_is_domain_error() {
        assert!(matches!(ipm_to_3d([0.0, 0.0], 0.0, &cam(0.0)), Err(Error::Domain(_))));
        assert!(ipm_to_3d([0.0, 0.0], -1.0, &cam(0.0)).is_err());
    }

    #[test]
    fn ground_depth_hits_ground() {
        let c = cam(0.03);
        let d = c.ground_depth(300.0, 300.0).unwrap();
        let p = ipm_to_3d([300.0, 300.0], d, &c).unwrap();
        assert!(p[2].abs() < 1e-9);
        assert!(c.ground_depth(320.0, 100.0).is_none());
    }
}
