//! Deterministic synthetic highway: road, lidar map, ego trajectory,
//! vehicles and rendered frames with exact ground truth.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::autolabel::project::{project_labels, FrameLabels, ProjectParams};
use crate::autolabel::render::{render_frame, Appearance, Cuboid, Render};
use crate::autolabel::road::Road;
use crate::autolabel::types::{BoundaryPolyline, LidarPoint, Pose, Side, Trajectory};
use crate::error::{Error, Result};
use crate::eval::RadarReturn;
use crate::postprocess::camera::CameraModel;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CloudConfig {
    /// Road-surface returns per square meter.
    pub asphalt_density: f64,
    /// Paint returns per meter of boundary.
    pub paint_density: f64,
    pub grass_density: f64,
    /// Roadside sign spacing in meters along the road.
    pub sign_spacing_m: f64,
    /// Standard deviation of lateral and vertical point noise.
    pub noise_m: f64,
}

impl Default for CloudConfig {
    fn default() -> Self {
        Self {
            asphalt_density: 1.0,
            paint_density: 20.0,
            grass_density: 0.3,
            sign_spacing_m: 40.0,
            noise_m: 0.02,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RadarConfig {
    pub dropout: f64,
    pub noise_m: f64,
}

impl Default for RadarConfig {
    fn default() -> Self {
        Self {
            dropout: 0.1,
            noise_m: 0.3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub image_width: usize,
    pub image_height: usize,
    pub camera: CameraModel,
    pub road_length_m: f64,
    /// Signed road curvature in 1/m (positive turns left).
    pub curvature: f64,
    pub lane_width: f64,
    pub lanes_left: usize,
    pub lanes_right: usize,
    pub paint_width: f64,
    pub shoulder_m: f64,
    /// Sinusoidal drift of the ego trajectory around the lane center.
    pub wander_amplitude_m: f64,
    pub wander_period_m: f64,
    pub pose_spacing_m: f64,
    pub speed_mps: f64,
    pub frames: usize,
    pub first_frame_m: f64,
    pub frame_spacing_m: f64,
    /// Inclusive range of the number of vehicles per frame.
    pub vehicles_per_frame: [usize; 2],
    /// Range of the distance ahead to a vehicle's rear face.
    pub vehicle_range_m: [f64; 2],
    /// Lanes vehicles may occupy, relative to the ego lane (negative left).
    pub vehicle_lanes: Vec<i32>,
    pub lateral_jitter_m: f64,
    pub supersample: usize,
    pub cloud: CloudConfig,
    pub radar: RadarConfig,
    pub labels: ProjectParams,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            image_width: 320,
            image_height: 240,
            camera: CameraModel {
                focal: 400.0,
                cx: 160.0,
                cy: 120.0,
                height: 1.5,
                pitch: 0.0,
            },
            road_length_m: 400.0,
            curvature: 0.0,
            lane_width: 3.6,
            lanes_left: 1,
            lanes_right: 1,
            paint_width: 0.15,
            shoulder_m: 1.0,
            wander_amplitude_m: 0.1,
            wander_period_m: 150.0,
            pose_spacing_m: 1.0,
            speed_mps: 25.0,
            frames: 10,
            first_frame_m: 20.0,
            frame_spacing_m: 12.0,
            vehicles_per_frame: [1, 2],
            vehicle_range_m: [12.0, 16.0],
            vehicle_lanes: vec![-1, 1],
            lateral_jitter_m: 0.3,
            supersample: 2,
            cloud: CloudConfig::default(),
            radar: RadarConfig::default(),
            labels: ProjectParams::default(),
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        self.camera.validate()?;
        let last = self.first_frame_m + self.frame_spacing_m * self.frames.saturating_sub(1) as f64;
        let checks = [
            (self.image_width > 0 && self.image_height > 0, "image size must be positive"),
            (self.lane_width > 0.0 && self.paint_width > 0.0, "lane and paint width must be positive"),
            (self.pose_spacing_m > 0.0 && self.speed_mps > 0.0, "pose spacing and speed must be positive"),
            (
                last + self.labels.far_m <= self.road_length_m,
                "road too short for the requested frames and label range",
            ),
            (
                self.vehicles_per_frame[0] <= self.vehicles_per_frame[1],
                "vehicles_per_frame must be an ordered range",
            ),
            (
                self.vehicle_range_m[0] > 0.0 && self.vehicle_range_m[0] <= self.vehicle_range_m[1],
                "vehicle_range_m must be an ordered positive range",
            ),
            (
                self.vehicle_lanes.iter().all(|l| -(self.lanes_left as i32) <= *l && *l <= self.lanes_right as i32),
                "vehicle_lanes refers to a lane that does not exist",
            ),
            (
                self.vehicles_per_frame[1] <= self.vehicle_lanes.len() || self.vehicles_per_frame[1] == 0,
                "at most one vehicle per lane and frame",
            ),
            (self.supersample >= 1, "supersample must be at least 1"),
            (
                self.curvature.abs() * self.road_length_m < std::f64::consts::PI,
                "road may not turn more than half a circle",
            ),
        ];
        for (ok, msg) in checks {
            if !ok {
                return Err(Error::config(msg));
            }
        }
        Ok(())
    }

    /// Lateral position of every painted boundary, left to right (positive right).
    pub fn boundary_offsets(&self) -> Vec<(Side, i32, f64)> {
        let w = self.lane_width;
        let mut out = Vec::new();
        for k in (0..=self.lanes_left).rev() {
            out.push((Side::Left, -(k as i32), -w / 2.0 - k as f64 * w));
        }
        for k in 0..=self.lanes_right {
            out.push((Side::Right, k as i32, w / 2.0 + k as f64 * w));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthFrame {
    pub index: usize,
    pub pose: Pose,
    pub vehicles: Vec<Cuboid>,
    pub radar: Vec<RadarReturn>,
}

#[derive(Debug, Clone)]
pub struct SynthScene {
    pub config: SynthConfig,
    pub seed: u64,
    pub road: Road,
    pub trajectory: Trajectory,
    pub cloud: Vec<LidarPoint>,
    /// Exact painted boundaries in the map frame, left to right.
    pub boundaries: Vec<BoundaryPolyline>,
    pub frames: Vec<SynthFrame>,
}

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

const PALETTE: [[u8; 3]; 6] = [
    [180, 30, 30],
    [30, 60, 160],
    [210, 210, 215],
    [40, 40, 45],
    [200, 170, 40],
    [60, 130, 70],
];

fn lift(road: &Road, s: f64, d: f64, z: f64) -> [f64; 3] {
    let p = road.point(s, d);
    [p[0], p[1], z]
}

fn generate_cloud(cfg: &SynthConfig, road: &Road, seed: u64) -> Vec<LidarPoint> {
    let mut r = rng(seed, 1);
    let c = &cfg.cloud;
    let noise = Normal::new(0.0, c.noise_m.max(1e-12)).unwrap();
    let grass_noise = Normal::new(0.0, 0.05).unwrap();
    let len = cfg.road_length_m;
    let offsets = cfg.boundary_offsets();
    let edge = offsets.iter().fold(0.0f64, |m, b| m.max(b.2.abs())) + cfg.shoulder_m;
    let mut pts = Vec::new();
    let mut push = |p: [f64; 3], intensity: f64| {
        pts.push(LidarPoint {
            x: p[0],
            y: p[1],
            z: p[2],
            intensity,
        })
    };

    let n = (c.asphalt_density * len * 2.0 * edge) as usize;
    for _ in 0..n {
        let (s, d) = (r.gen_range(0.0..len), r.gen_range(-edge..edge));
        let z = noise.sample(&mut r);
        push(lift(road, s, d, z), r.gen_range(10.0..70.0));
    }
    for &(_, _, b) in &offsets {
        let n = (c.paint_density * len) as usize;
        for _ in 0..n {
            let s = r.gen_range(0.0..len);
            let d = b + r.gen_range(-cfg.paint_width / 2.0..cfg.paint_width / 2.0) + noise.sample(&mut r);
            let z = noise.sample(&mut r);
            push(lift(road, s, d, z), r.gen_range(150.0..255.0));
        }
    }
    let n = (c.grass_density * len * 16.0) as usize;
    for _ in 0..n {
        let side = if r.gen_bool(0.5) { 1.0 } else { -1.0 };
        let (s, d) = (r.gen_range(0.0..len), side * r.gen_range(edge..edge + 8.0));
        let z = grass_noise.sample(&mut r);
        push(lift(road, s, d, z), r.gen_range(20.0..110.0));
    }
    if c.sign_spacing_m > 0.0 {
        let mut s0 = c.sign_spacing_m / 2.0;
        let mut side = 1.0;
        while s0 < len {
            // roadside sign: bright but well above the ground
            for _ in 0..30 {
                let s = s0 + r.gen_range(-0.5..0.5);
                let d = side * (edge + 2.0) + r.gen_range(-0.1..0.1);
                push(lift(road, s, d, r.gen_range(1.5..3.0)), r.gen_range(200.0..255.0));
            }
            // overhead clutter inside the lateral paint window
            for _ in 0..10 {
                let s = s0 + r.gen_range(-1.0..1.0);
                let d = side * r.gen_range(1.5..2.1);
                push(lift(road, s, d, r.gen_range(1.2..3.0)), r.gen_range(200.0..255.0));
            }
            side = -side;
            s0 += c.sign_spacing_m;
        }
    }
    pts
}

fn generate_trajectory(cfg: &SynthConfig, road: &Road, seed: u64) -> Result<Trajectory> {
    let mut r = rng(seed, 2);
    let phase = r.gen_range(0.0..std::f64::consts::TAU);
    let k = std::f64::consts::TAU / cfg.wander_period_m;
    let a = cfg.wander_amplitude_m;
    let n = (cfg.road_length_m / cfg.pose_spacing_m).floor() as usize;
    let poses = (0..=n)
        .map(|i| {
            let s = i as f64 * cfg.pose_spacing_m;
            let d = a * (k * s + phase).sin();
            let slope = a * k * (k * s + phase).cos();
            let p = road.point(s, d);
            Pose {
                t: s / cfg.speed_mps,
                x: p[0],
                y: p[1],
                z: 0.0,
                // lateral drift to the right turns the heading clockwise
                heading: road.heading_at(s) - slope.atan(),
            }
        })
        .collect();
    Trajectory::new(poses)
}

fn generate_frame(cfg: &SynthConfig, road: &Road, traj: &Trajectory, seed: u64, index: usize) -> SynthFrame {
    let mut r = rng(seed, 1000 + index as u64);
    let s_frame = cfg.first_frame_m + index as f64 * cfg.frame_spacing_m;
    let pose = traj.pose_at(s_frame);
    let (lo, hi) = (cfg.vehicles_per_frame[0], cfg.vehicles_per_frame[1]);
    let count = r.gen_range(lo..=hi);
    let mut lanes = cfg.vehicle_lanes.clone();
    lanes.shuffle(&mut r);
    let (plo, phi) = (cfg.vehicle_range_m[0], cfg.vehicle_range_m[1]);
    let mut vehicles = Vec::with_capacity(count);
    for &lane in lanes.iter().take(count) {
        let length = r.gen_range(4.2..4.8);
        let width = r.gen_range(1.7..1.9);
        let height = r.gen_range(1.4..1.6);
        let ahead = if phi > plo { r.gen_range(plo..phi) } else { plo };
        let s = s_frame + ahead + length / 2.0;
        let d = lane as f64 * cfg.lane_width + r.gen_range(-cfg.lateral_jitter_m..=cfg.lateral_jitter_m);
        let c = road.point(s, d);
        vehicles.push(Cuboid {
            center: c,
            heading: road.heading_at(s),
            length,
            width,
            height,
            color: PALETTE[r.gen_range(0..PALETTE.len())],
        });
    }
    let noise = Normal::new(0.0, cfg.radar.noise_m.max(1e-12)).unwrap();
    let mut radar = Vec::new();
    for v in &vehicles {
        if r.gen_bool(cfg.radar.dropout.clamp(0.0, 1.0)) {
            continue;
        }
        let p = pose.to_vehicle(v.rear_center());
        radar.push(RadarReturn {
            forward: p[0] + noise.sample(&mut r),
            lateral: p[1] + noise.sample(&mut r),
        });
    }
    SynthFrame {
        index,
        pose,
        vehicles,
        radar,
    }
}

/// Builds the scene for `seed`. Identical inputs give identical scenes.
pub fn synth_scene(cfg: &SynthConfig, seed: u64) -> Result<SynthScene> {
    cfg.validate()?;
    let mut r = rng(seed, 0);
    let road = Road {
        origin: [0.0, 0.0],
        heading: r.gen_range(-std::f64::consts::PI..std::f64::consts::PI),
        curvature: cfg.curvature,
    };
    let trajectory = generate_trajectory(cfg, &road, seed)?;
    let cloud = generate_cloud(cfg, &road, seed);
    let n = (cfg.road_length_m / cfg.pose_spacing_m).ceil() as usize;
    let boundaries = cfg
        .boundary_offsets()
        .into_iter()
        .map(|(side, offset_index, d)| BoundaryPolyline {
            side,
            offset_index,
            points: (0..=n)
                .map(|i| lift(&road, (i as f64 * cfg.pose_spacing_m).min(cfg.road_length_m), d, 0.0))
                .collect(),
        })
        .collect();
    let frames = (0..cfg.frames)
        .map(|i| generate_frame(cfg, &road, &trajectory, seed, i))
        .collect();
    Ok(SynthScene {
        config: cfg.clone(),
        seed,
        road,
        trajectory,
        cloud,
        boundaries,
        frames,
    })
}

impl SynthScene {
    pub fn appearance(&self) -> Appearance {
        Appearance {
            paint_offsets: self.config.boundary_offsets().iter().map(|b| b.2).collect(),
            paint_width: self.config.paint_width,
            shoulder: self.config.shoulder_m,
            supersample: self.config.supersample,
            texture_seed: self.seed,
        }
    }

    pub fn render(&self, frame: &SynthFrame) -> Render {
        render_frame(
            &self.road,
            &self.appearance(),
            &frame.vehicles,
            &frame.pose,
            &self.config.camera,
            self.config.image_width,
            self.config.image_height,
        )
    }

    /// Pixel labels of `frame` against the given map boundaries.
    pub fn labels(&self, frame: &SynthFrame, boundaries: &[BoundaryPolyline], render: Option<&Render>) -> FrameLabels {
        project_labels(
            boundaries,
            &frame.vehicles,
            &frame.pose,
            &self.config.camera,
            (self.config.image_width, self.config.image_height),
            &self.config.labels,
            render,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SynthConfig {
        SynthConfig {
            road_length_m: 160.0,
            frames: 2,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn deterministic() {
        let a = synth_scene(&small(), 7).unwrap();
        let b = synth_scene(&small(), 7).unwrap();
        assert_eq!(a.cloud, b.cloud);
        assert_eq!(a.frames, b.frames);
        let c = synth_scene(&small(), 8).unwrap();
        assert_ne!(a.cloud, c.cloud);
    }

    #[test]
    fn rejects_short_road() {
        let cfg = SynthConfig {
            road_length_m: 50.0,
            ..small()
        };
        assert!(synth_scene(&cfg, 1).is_err());
    }
}
