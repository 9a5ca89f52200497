//! Per-stage wall-clock timing of inference and a merge scaling sweep.

use std::time::Instant;

use image::RgbImage;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::detector::head::forward_detect;
use crate::detector::types::VehicleBox;
use crate::error::{Error, Result};
use crate::nn::Network;
use crate::pipeline::config::RunConfig;
use crate::pipeline::image::image_to_tensor;
use crate::postprocess::{extract_candidates, lanes_from_segments, merge_boxes, MergeParams};
use crate::rect::Rect;

pub const HARDWARE_NOTE: &str = "Timings are hardware-bound. The 44 Hz figure published for the original \
GPU implementation is not reproduced or asserted here; these numbers describe only the machine that ran the benchmark.";

pub const STAGES: [&str; 5] = ["forward", "extract", "merge", "lane_post", "total"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub samples: usize,
    pub mean_ms: f64,
    pub median_ms: f64,
    pub p95_ms: f64,
    /// Frames per second at the mean time.
    pub hz: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub candidates: usize,
    pub ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub frames: usize,
    pub repeat: usize,
    pub image_width: usize,
    pub image_height: usize,
    pub stages: Vec<StageTiming>,
    pub merge_sweep: Vec<SweepPoint>,
    /// Least-squares slope of log(time) against log(candidates).
    pub merge_exponent: f64,
    pub note: String,
}

impl BenchReport {
    pub fn stage(&self, name: &str) -> Option<&StageTiming> {
        self.stages.iter().find(|s| s.stage == name)
    }
}

/// Nearest-rank statistics over millisecond samples.
pub fn summarize(stage: &str, ms: &[f64]) -> StageTiming {
    let mut v = ms.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    let mean = v.iter().sum::<f64>() / n.max(1) as f64;
    let rank = |q: f64| v[((q * n as f64).ceil() as usize).clamp(1, n) - 1];
    let median = if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) };
    StageTiming {
        stage: stage.to_string(),
        samples: n,
        mean_ms: mean,
        median_ms: median,
        p95_ms: rank(0.95),
        hz: if mean > 0.0 { 1000.0 / mean } else { f64::INFINITY },
    }
}

fn ms_since(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

/// Times every frame `repeat` times, single-threaded, then runs the merge sweep.
pub fn run_bench(net: &Network, cfg: &RunConfig, images: &[RgbImage], repeat: usize) -> Result<BenchReport> {
    if images.is_empty() || repeat == 0 {
        return Err(Error::config("bench needs at least one frame and repeat >= 1"));
    }
    let geometry = cfg.geometry()?;
    let codec = cfg.codec();
    let p = &cfg.postprocess;
    let mut samples: Vec<Vec<f64>> = vec![Vec::new(); STAGES.len()];
    for _ in 0..repeat {
        for img in images {
            let t0 = Instant::now();
            let grid = forward_detect(&image_to_tensor(img), net, &geometry, &codec)?;
            let t_fwd = ms_since(t0);
            let t = Instant::now();
            let c = extract_candidates(&grid, p.threshold);
            let t_ext = ms_since(t);
            let t = Instant::now();
            let v = merge_boxes(&c.vehicles, &p.merge);
            let t_merge = ms_since(t);
            let t = Instant::now();
            let lanes = lanes_from_segments(&c.lanes, &cfg.camera, p)?;
            let t_lane = ms_since(t);
            std::hint::black_box((v, lanes));
            for (s, x) in samples.iter_mut().zip([t_fwd, t_ext, t_merge, t_lane, ms_since(t0)]) {
                s.push(x);
            }
        }
    }
    let merge_sweep = merge_sweep(&cfg.bench.merge_sweep, cfg.bench.sweep_repeat, &p.merge, cfg.seed);
    Ok(BenchReport {
        frames: images.len(),
        repeat,
        image_width: cfg.input.width,
        image_height: cfg.input.height,
        stages: STAGES.iter().zip(&samples).map(|(n, s)| summarize(n, s)).collect(),
        merge_exponent: fit_exponent(&merge_sweep),
        merge_sweep,
        note: HARDWARE_NOTE.to_string(),
    })
}

/// `n` candidates in clusters of eight jittered copies laid out on a grid.
pub fn sweep_candidates(n: usize, seed: u64) -> Vec<VehicleBox> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ n as u64);
    let clusters = n.div_ceil(8);
    let side = (clusters as f64).sqrt().ceil() as usize;
    (0..n)
        .map(|i| {
            let c = i / 8;
            let (x, y) = ((c % side) as f64 * 100.0, (c / side) as f64 * 100.0);
            let mut j = || rng.gen_range(-2.0..2.0);
            let r = Rect::new(x + j(), y + j(), x + 40.0 + j(), y + 30.0 + j());
            VehicleBox {
                rect: r,
                depth: 20.0,
                score: 0.9,
            }
        })
        .collect()
}

/// Best-of-`repeat` merge time per candidate count.
pub fn merge_sweep(counts: &[usize], repeat: usize, params: &MergeParams, seed: u64) -> Vec<SweepPoint> {
    counts
        .iter()
        .map(|&n| {
            let boxes = sweep_candidates(n, seed);
            let best = (0..repeat.max(1))
                .map(|_| {
                    let t = Instant::now();
                    std::hint::black_box(merge_boxes(&boxes, params));
                    ms_since(t)
                })
                .fold(f64::INFINITY, f64::min);
            SweepPoint { candidates: n, ms: best }
        })
        .collect()
}

pub fn fit_exponent(points: &[SweepPoint]) -> f64 {
    let xy: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| p.candidates > 0 && p.ms > 0.0)
        .map(|p| ((p.candidates as f64).ln(), p.ms.ln()))
        .collect();
    let n = xy.len() as f64;
    if xy.len() < 2 {
        return f64::NAN;
    }
    let (mx, my) = (xy.iter().map(|p| p.0).sum::<f64>() / n, xy.iter().map(|p| p.1).sum::<f64>() / n);
    let sxy: f64 = xy.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = xy.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn statistics() {
        let s = summarize("x", &[4.0, 1.0, 3.0, 2.0]);
        assert_eq!((s.mean_ms, s.median_ms, s.p95_ms), (2.5, 2.5, 4.0));
        assert_eq!(s.hz, 400.0);
        let one = summarize("x", &[5.0]);
        assert_eq!((one.median_ms, one.p95_ms, one.samples), (5.0, 5.0, 1));
    }

    #[test]
    fn exponent_of_power_laws() {
        let pts = |k: f64| -> Vec<SweepPoint> {
            [10, 20, 40, 80]
                .iter()
                .map(|&n| SweepPoint {
                    candidates: n,
                    ms: 0.01 * (n as f64).powf(k),
                })
                .collect()
        };
        assert!((fit_exponent(&pts(2.0)) - 2.0).abs() < 1e-9);
        assert!((fit_exponent(&pts(1.0)) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn sweep_input_merges_to_clusters() {
        let b = sweep_candidates(80, 1);
        assert_eq!(merge_boxes(&b, &MergeParams::default()).len(), 10);
    }
}
