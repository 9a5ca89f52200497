//! Translation and perspective augmentation applied identically to pixels
//! and labels.

use image::{Rgb, RgbImage};
use nalgebra::{Matrix3, SMatrix, SVector, Vector3};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autolabel::FrameLabels;
use crate::detector::types::{LanePolyline, VehicleBox};
use crate::error::{Error, Result};
use crate::rect::Rect;

/// Corner displacements `[top-left, top-right, bottom-right, bottom-left]`,
/// each `[dx, dy]` as a fraction of the image width.
pub type CornerShift = [[f64; 2]; 4];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentConfig {
    pub enabled: bool,
    /// Probability that a training sample is left untouched.
    pub identity_prob: f64,
    /// Translations are drawn uniformly from `[-max, max]` on each axis.
    pub max_translation_px: i32,
    /// The perspective family; the default has seven members.
    pub perspectives: Vec<CornerShift>,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        let mut perspectives = Vec::new();
        for d in [0.025, 0.05, 0.075] {
            // top edge pulled in, then pushed out
            perspectives.push([[d, 0.0], [-d, 0.0], [0.0, 0.0], [0.0, 0.0]]);
            perspectives.push([[-d, 0.0], [d, 0.0], [0.0, 0.0], [0.0, 0.0]]);
        }
        perspectives.push([[0.05, 0.025], [-0.025, 0.0], [0.025, 0.0], [0.0, -0.025]]);
        Self {
            enabled: true,
            identity_prob: 0.25,
            max_translation_px: 16,
            perspectives,
        }
    }
}

impl AugmentConfig {
    pub fn validate(&self, width: usize, height: usize) -> Result<()> {
        if !(0.0..=1.0).contains(&self.identity_prob) || self.max_translation_px < 0 {
            return Err(Error::config(format!(
                "invalid augmentation settings: identity_prob {}, max_translation_px {}",
                self.identity_prob, self.max_translation_px
            )));
        }
        for k in 0..self.perspectives.len() {
            self.homography(AugmentMode::Perspective(k), width, height)?;
        }
        Ok(())
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> AugmentMode {
        if !self.enabled || rng.gen::<f64>() < self.identity_prob {
            return AugmentMode::Identity;
        }
        let k = rng.gen_range(0..=self.perspectives.len());
        if k == self.perspectives.len() {
            let m = self.max_translation_px;
            AugmentMode::Translation {
                dx: rng.gen_range(-m..=m),
                dy: rng.gen_range(-m..=m),
            }
        } else {
            AugmentMode::Perspective(k)
        }
    }

    /// Pixel-space transform of a mode (pixel `(x, y)` has its center at
    /// `(x + 0.5, y + 0.5)`).
    pub fn homography(&self, mode: AugmentMode, width: usize, height: usize) -> Result<Homography> {
        match mode {
            AugmentMode::Identity => Ok(Homography::identity()),
            AugmentMode::Translation { dx, dy } => Ok(Homography::translation(dx as f64, dy as f64)),
            AugmentMode::Perspective(k) => {
                let shift = self.perspectives.get(k).ok_or_else(|| {
                    Error::config(format!(
                        "perspective index {k} outside the configured family of {}",
                        self.perspectives.len()
                    ))
                })?;
                let (w, h) = (width as f64, height as f64);
                let src = [[0.0, 0.0], [w, 0.0], [w, h], [0.0, h]];
                let mut dst = src;
                for (d, s) in dst.iter_mut().zip(shift) {
                    d[0] += s[0] * w;
                    d[1] += s[1] * w;
                }
                Homography::from_corners(&src, &dst)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AugmentMode {
    Identity,
    Translation { dx: i32, dy: i32 },
    Perspective(usize),
}

/// An invertible plane projective transform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Homography {
    pub m: Matrix3<f64>,
    inv: Matrix3<f64>,
}

impl Homography {
    pub fn new(m: Matrix3<f64>) -> Result<Self> {
        let scale = m.abs().max();
        if !(scale.is_finite() && scale > 0.0) || m.determinant().abs() <= 1e-12 * scale.powi(3) {
            return Err(Error::config("homography is not invertible"));
        }
        let inv = m.try_inverse().ok_or_else(|| Error::config("homography is not invertible"))?;
        Ok(Self { m, inv })
    }

    pub fn identity() -> Self {
        Self {
            m: Matrix3::identity(),
            inv: Matrix3::identity(),
        }
    }

    pub fn translation(dx: f64, dy: f64) -> Self {
        let m = Matrix3::new(1.0, 0.0, dx, 0.0, 1.0, dy, 0.0, 0.0, 1.0);
        let inv = Matrix3::new(1.0, 0.0, -dx, 0.0, 1.0, -dy, 0.0, 0.0, 1.0);
        Self { m, inv }
    }

    /// Direct linear transform from four point correspondences (`h33 = 1`).
    pub fn from_corners(src: &[[f64; 2]; 4], dst: &[[f64; 2]; 4]) -> Result<Self> {
        let mut a = SMatrix::<f64, 8, 8>::zeros();
        let mut b = SVector::<f64, 8>::zeros();
        for i in 0..4 {
            let ([x, y], [u, v]) = (src[i], dst[i]);
            let r = 2 * i;
            a.row_mut(r).copy_from_slice(&[x, y, 1.0, 0.0, 0.0, 0.0, -u * x, -u * y]);
            a.row_mut(r + 1).copy_from_slice(&[0.0, 0.0, 0.0, x, y, 1.0, -v * x, -v * y]);
            b[r] = u;
            b[r + 1] = v;
        }
        let h = a
            .lu()
            .solve(&b)
            .ok_or_else(|| Error::config("degenerate corner correspondence: homography is not invertible"))?;
        Self::new(Matrix3::new(h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], 1.0))
    }

    pub fn apply(&self, p: [f64; 2]) -> [f64; 2] {
        map(&self.m, p)
    }

    pub fn apply_inverse(&self, p: [f64; 2]) -> [f64; 2] {
        map(&self.inv, p)
    }

    pub fn is_identity(&self) -> bool {
        self.m == Matrix3::identity()
    }
}

fn map(m: &Matrix3<f64>, p: [f64; 2]) -> [f64; 2] {
    let q = m * Vector3::new(p[0], p[1], 1.0);
    [q[0] / q[2], q[1] / q[2]]
}

/// Inverse-maps every output pixel center and samples bilinearly; samples
/// outside the source are black.
pub fn warp_image(img: &RgbImage, h: &Homography) -> RgbImage {
    if h.is_identity() {
        return img.clone();
    }
    let (w, ht) = img.dimensions();
    let mut out = RgbImage::new(w, ht);
    let fetch = |x: i64, y: i64| -> [f64; 3] {
        if x < 0 || y < 0 || x >= w as i64 || y >= ht as i64 {
            return [0.0; 3];
        }
        img.get_pixel(x as u32, y as u32).0.map(|c| c as f64)
    };
    for (x, y, px) in out.enumerate_pixels_mut() {
        let [sx, sy] = h.apply_inverse([x as f64 + 0.5, y as f64 + 0.5]);
        let (fx, fy) = (sx - 0.5, sy - 0.5);
        if !(fx > -1.0 && fy > -1.0 && fx < w as f64 && fy < ht as f64) {
            continue;
        }
        let (x0, y0) = (fx.floor() as i64, fy.floor() as i64);
        let (tx, ty) = (fx - x0 as f64, fy - y0 as f64);
        let (a, b, c, d) = (fetch(x0, y0), fetch(x0 + 1, y0), fetch(x0, y0 + 1), fetch(x0 + 1, y0 + 1));
        let mut v = [0u8; 3];
        for k in 0..3 {
            let top = a[k] * (1.0 - tx) + b[k] * tx;
            let bot = c[k] * (1.0 - tx) + d[k] * tx;
            v[k] = (top * (1.0 - ty) + bot * ty).round().clamp(0.0, 255.0) as u8;
        }
        *px = Rgb(v);
    }
    out
}

/// Maps label geometry analytically. Boxes become the bounding box of their
/// mapped corners clipped to the image (dropped if nothing remains); lane
/// knots are mapped exactly and keep their depth.
pub fn warp_labels(labels: &FrameLabels, h: &Homography, width: usize, height: usize) -> FrameLabels {
    let vehicles = labels
        .vehicles
        .iter()
        .filter_map(|v| {
            let r = v.rect;
            let corners = [[r.x1, r.y1], [r.x2, r.y1], [r.x2, r.y2], [r.x1, r.y2]].map(|c| h.apply(c));
            let b = Rect::bounding(corners)?;
            let clipped = Rect::new(b.x1.max(0.0), b.y1.max(0.0), b.x2.min(width as f64), b.y2.min(height as f64));
            clipped.is_valid().then_some(VehicleBox { rect: clipped, ..*v })
        })
        .collect();
    let lanes = labels
        .lanes
        .iter()
        .map(|l| LanePolyline {
            knots: l
                .knots
                .iter()
                .map(|k| {
                    let [u, v] = h.apply([k[0], k[1]]);
                    [u, v, k[2]]
                })
                .collect(),
            ..l.clone()
        })
        .collect();
    FrameLabels { vehicles, lanes }
}

pub fn augment(
    img: &RgbImage,
    labels: &FrameLabels,
    mode: AugmentMode,
    cfg: &AugmentConfig,
) -> Result<(RgbImage, FrameLabels)> {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let hm = cfg.homography(mode, w, h)?;
    Ok((warp_image(img, &hm), warp_labels(labels, &hm, w, h)))
}
