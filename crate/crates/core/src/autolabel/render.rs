//! Ray-cast renderer for synthetic highway frames.

use image::RgbImage;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autolabel::road::Road;
use crate::autolabel::types::Pose;
use crate::postprocess::camera::CameraModel;

/// Vehicle body: an oriented box standing on the ground.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cuboid {
    /// Map-frame center of the footprint.
    pub center: [f64; 2],
    pub heading: f64,
    pub length: f64,
    pub width: f64,
    pub height: f64,
    pub color: [u8; 3],
}

impl Cuboid {
    /// The eight corners in the map frame.
    pub fn corners(&self) -> [[f64; 3]; 8] {
        let (s, c) = self.heading.sin_cos();
        let mut out = [[0.0; 3]; 8];
        let mut i = 0;
        for lx in [-0.5, 0.5] {
            for ly in [-0.5, 0.5] {
                for z in [0.0, self.height] {
                    let (x, y) = (lx * self.length, ly * self.width);
                    out[i] = [self.center[0] + c * x - s * y, self.center[1] + s * x + c * y, z];
                    i += 1;
                }
            }
        }
        out
    }

    /// Center of the rear face (the end facing `-heading`).
    pub fn rear_center(&self) -> [f64; 3] {
        let (s, c) = self.heading.sin_cos();
        let h = self.length / 2.0;
        [self.center[0] - c * h, self.center[1] - s * h, self.height / 2.0]
    }

    fn to_local(&self, p: [f64; 3]) -> [f64; 3] {
        let (s, c) = self.heading.sin_cos();
        let (dx, dy) = (p[0] - self.center[0], p[1] - self.center[1]);
        [c * dx + s * dy, -s * dx + c * dy, p[2]]
    }

    /// Ray parameter of the first hit and the local hit point.
    fn intersect(&self, o: [f64; 3], dir: [f64; 3]) -> Option<(f64, usize, [f64; 3])> {
        let lo = self.to_local(o);
        let (s, c) = self.heading.sin_cos();
        let ld = [c * dir[0] + s * dir[1], -s * dir[0] + c * dir[1], dir[2]];
        let min = [-self.length / 2.0, -self.width / 2.0, 0.0];
        let max = [self.length / 2.0, self.width / 2.0, self.height];
        let (mut t0, mut t1, mut axis) = (f64::NEG_INFINITY, f64::INFINITY, 0);
        for a in 0..3 {
            if ld[a].abs() < 1e-15 {
                if lo[a] < min[a] || lo[a] > max[a] {
                    return None;
                }
                continue;
            }
            let (mut ta, mut tb) = ((min[a] - lo[a]) / ld[a], (max[a] - lo[a]) / ld[a]);
            if ta > tb {
                std::mem::swap(&mut ta, &mut tb);
            }
            if ta > t0 {
                t0 = ta;
                axis = a;
            }
            t1 = t1.min(tb);
        }
        (t0 <= t1 && t0 > 0.0).then(|| (t0, axis, [lo[0] + t0 * ld[0], lo[1] + t0 * ld[1], lo[2] + t0 * ld[2]]))
    }

    fn shade(&self, axis: usize, local: [f64; 3]) -> [f64; 3] {
        let base = self.color.map(|c| c as f64);
        let rel_z = local[2] / self.height;
        let scaled = |f: f64| base.map(|c| c * f);
        match axis {
            // rear or front face
            0 => {
                let rel_y = local[1] / self.width + 0.5;
                if rel_z > 0.6 && rel_z < 0.92 && rel_y > 0.1 && rel_y < 0.9 {
                    [35.0, 38.0, 48.0]
                } else if rel_z > 0.4 && rel_z < 0.55 && !(0.2..=0.8).contains(&rel_y) {
                    [200.0, 20.0, 20.0]
                } else if rel_z < 0.12 {
                    [20.0, 20.0, 20.0]
                } else {
                    scaled(0.85)
                }
            }
            1 => {
                if rel_z > 0.6 && rel_z < 0.92 {
                    [45.0, 48.0, 58.0]
                } else if rel_z < 0.3 {
                    scaled(0.45)
                } else {
                    scaled(0.65)
                }
            }
            _ => scaled(1.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Appearance {
    /// Lateral positions of painted boundaries (positive right).
    pub paint_offsets: Vec<f64>,
    pub paint_width: f64,
    /// Asphalt extends this far past the outermost boundaries.
    pub shoulder: f64,
    /// Samples per pixel side.
    pub supersample: usize,
    pub texture_seed: u64,
}

/// One rendered frame plus per-pixel vehicle buffers from the pixel-center ray.
pub struct Render {
    pub image: RgbImage,
    /// Index of the visible vehicle, or `u16::MAX`.
    pub vehicle_id: Vec<u16>,
    /// Camera depth of the visible vehicle surface, infinite elsewhere.
    pub vehicle_depth: Vec<f32>,
}

impl Render {
    pub fn width(&self) -> usize {
        self.image.width() as usize
    }

    /// Pixel-aligned box of the pixels showing vehicle `id`, as `[x1, y1, x2, y2)`.
    pub fn vehicle_bounds(&self, id: usize) -> Option<[usize; 4]> {
        let w = self.width();
        let mut b: Option<[usize; 4]> = None;
        for (i, &v) in self.vehicle_id.iter().enumerate() {
            if v as usize == id {
                let (x, y) = (i % w, i / w);
                b = Some(match b {
                    None => [x, y, x + 1, y + 1],
                    Some(r) => [r[0].min(x), r[1].min(y), r[2].max(x + 1), r[3].max(y + 1)],
                });
            }
        }
        b
    }
}

fn hash(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Deterministic value noise in [-1, 1] on a 0.25 m lattice.
fn ground_noise(seed: u64, x: f64, y: f64) -> f64 {
    let (i, j) = ((x * 4.0).floor() as i64, (y * 4.0).floor() as i64);
    let h = hash(seed ^ hash(i as u64 ^ hash(j as u64)));
    (h >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
}

struct Scene<'a> {
    road: &'a Road,
    look: &'a Appearance,
    vehicles: &'a [Cuboid],
    origin: [f64; 3],
    axes: [[f64; 3]; 3],
    cam: &'a CameraModel,
}

impl Scene<'_> {
    /// Map-frame ray for image position `(u, v)`, scaled to unit camera depth.
    fn ray(&self, u: f64, v: f64) -> [f64; 3] {
        let (x, y) = ((u - self.cam.cx) / self.cam.focal, (v - self.cam.cy) / self.cam.focal);
        let [r, d, f] = self.axes;
        [0, 1, 2].map(|i| x * r[i] + y * d[i] + f[i])
    }

    fn vehicle_hit(&self, dir: [f64; 3]) -> Option<(usize, f64, usize, [f64; 3])> {
        let mut best: Option<(usize, f64, usize, [f64; 3])> = None;
        for (k, c) in self.vehicles.iter().enumerate() {
            if let Some((t, axis, local)) = c.intersect(self.origin, dir) {
                if best.is_none_or(|b| t < b.1) {
                    best = Some((k, t, axis, local));
                }
            }
        }
        best
    }

    fn sample(&self, u: f64, v: f64) -> [f64; 3] {
        let dir = self.ray(u, v);
        let ground_t = (dir[2] < -1e-12).then(|| -self.origin[2] / dir[2]);
        if let Some((k, t, axis, local)) = self.vehicle_hit(dir) {
            if ground_t.is_none_or(|g| t < g) {
                return self.vehicles[k].shade(axis, local);
            }
        }
        let Some(t) = ground_t else {
            let f = ((self.cam.cy - v) / self.cam.cy).clamp(0.0, 1.0);
            return [150.0 - 40.0 * f, 180.0 - 30.0 * f, 215.0];
        };
        let p = [self.origin[0] + t * dir[0], self.origin[1] + t * dir[1]];
        let (_, d) = self.road.frenet(p[0], p[1]);
        let n = ground_noise(self.look.texture_seed, p[0], p[1]);
        let half = self.look.paint_width / 2.0;
        if self.look.paint_offsets.iter().any(|b| (d - b).abs() <= half) {
            return [232.0 + 6.0 * n, 232.0 + 6.0 * n, 222.0 + 6.0 * n];
        }
        let edge = self.look.paint_offsets.iter().fold(0.0f64, |m, b| m.max(b.abs())) + self.look.shoulder;
        if d.abs() <= edge {
            let g = 92.0 + 10.0 * n;
            [g, g, g + 4.0]
        } else {
            [70.0 + 12.0 * n, 105.0 + 14.0 * n, 48.0 + 8.0 * n]
        }
    }
}

/// Renders the view from `pose` (camera `cam.height` above it).
pub fn render_frame(
    road: &Road,
    look: &Appearance,
    vehicles: &[Cuboid],
    pose: &Pose,
    cam: &CameraModel,
    width: usize,
    height: usize,
) -> Render {
    let to_map_dir = |v: [f64; 3]| {
        let o = pose.to_map([0.0; 3]);
        let p = pose.to_map(v);
        [p[0] - o[0], p[1] - o[1], p[2] - o[2]]
    };
    let unit = |i: usize| {
        let mut c = [0.0; 3];
        c[i] = 1.0;
        let o = cam.from_camera([0.0; 3]);
        let p = cam.from_camera(c);
        to_map_dir([p[0] - o[0], p[1] - o[1], p[2] - o[2]])
    };
    let scene = Scene {
        road,
        look,
        vehicles,
        origin: pose.to_map([0.0, 0.0, cam.height]),
        axes: [unit(0), unit(1), unit(2)],
        cam,
    };
    let ss = look.supersample.max(1);
    let rows: Vec<(Vec<u8>, Vec<u16>, Vec<f32>)> = (0..height)
        .into_par_iter()
        .map(|y| {
            let mut rgb = Vec::with_capacity(width * 3);
            let mut ids = Vec::with_capacity(width);
            let mut depth = Vec::with_capacity(width);
            for x in 0..width {
                let mut acc = [0.0; 3];
                for sy in 0..ss {
                    for sx in 0..ss {
                        let u = x as f64 + (sx as f64 + 0.5) / ss as f64;
                        let v = y as f64 + (sy as f64 + 0.5) / ss as f64;
                        let c = scene.sample(u, v);
                        for i in 0..3 {
                            acc[i] += c[i];
                        }
                    }
                }
                let n = (ss * ss) as f64;
                rgb.extend(acc.map(|c| (c / n).round().clamp(0.0, 255.0) as u8));
                let dir = scene.ray(x as f64 + 0.5, y as f64 + 0.5);
                let ground_t = (dir[2] < -1e-12).then(|| -scene.origin[2] / dir[2]);
                match scene.vehicle_hit(dir).filter(|h| ground_t.is_none_or(|g| h.1 < g)) {
                    Some((k, t, _, _)) => {
                        ids.push(k as u16);
                        depth.push(t as f32);
                    }
                    None => {
                        ids.push(u16::MAX);
                        depth.push(f32::INFINITY);
                    }
                }
            }
            (rgb, ids, depth)
        })
        .collect();
    let mut data = Vec::with_capacity(width * height * 3);
    let mut vehicle_id = Vec::with_capacity(width * height);
    let mut vehicle_depth = Vec::with_capacity(width * height);
    for (r, i, d) in rows {
        data.extend(r);
        vehicle_id.extend(i);
        vehicle_depth.extend(d);
    }
    Render {
        image: RgbImage::from_raw(width as u32, height as u32, data).expect("buffer size matches"),
        vehicle_id,
        vehicle_depth,
    }
}
