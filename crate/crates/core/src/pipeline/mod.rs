//! Dataset formats, augmentation, configuration and the commands behind the
//! `hpk` binary.

pub mod augment;
pub mod bench;
pub mod config;
pub mod dataset;
pub mod evaluate;
pub mod image;
pub mod infer;
pub mod train;

pub use augment::{augment, AugmentConfig, AugmentMode, Homography};
pub use bench::{run_bench, BenchReport};
pub use config::{reduced_architecture, Layout, RunConfig};
pub use dataset::{load_dataset, write_manifest, Dataset, FrameRecord, VehicleLabel};
pub use evaluate::run_eval;
pub use infer::{read_detections, run_infer, write_detections, DetectionRecord};
pub use train::{init_training, load_samples, run_train, Sample, TrainOutcome};

use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::autolabel::io::{read_cloud, read_trajectory, write_cloud_binary, write_trajectory};
use crate::autolabel::project::project_boundary;
use crate::autolabel::{apply_corrections, autolabel, load_corrections, synth_scene, BoundaryPolyline};
use crate::error::{Error, Result};
use crate::nn::checkpoint::{load_checkpoint, save_checkpoint};
use crate::nn::{Network, Tensor};

pub const MANIFEST: &str = "manifest.jsonl";
pub const AUTOLABEL_MANIFEST: &str = "manifest_autolabel.jsonl";
pub const CLOUD: &str = "cloud.hpkc";
pub const TRAJECTORY: &str = "trajectory.csv";
pub const TRUTH_BOUNDARIES: &str = "boundaries_truth.json";
pub const BOUNDARIES: &str = "boundaries.json";
pub const CHECKPOINT: &str = "checkpoint.hpkw";
pub const TRAIN_LOG: &str = "train_log.jsonl";
pub const DETECTIONS: &str = "detections.jsonl";
pub const REPORT_JSON: &str = "report.json";
pub const REPORT_CSV: &str = "report.csv";
pub const BENCH: &str = "bench.json";

fn create_dir(p: &Path) -> Result<()> {
    std::fs::create_dir_all(p).map_err(|e| Error::io(p, e))
}

fn write(p: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    std::fs::write(p, contents).map_err(|e| Error::io(p, e))
}

fn write_json<T: serde::Serialize>(p: &Path, v: &T) -> Result<()> {
    write(p, serde_json::to_string_pretty(v).expect("serializable") + "\n")
}

/// Generates a scene: frames as P6 images, the manifest, the lidar map, the
/// trajectory and the generator's true boundaries.
pub fn cmd_synth(cfg: &RunConfig, layout: &Layout) -> Result<Vec<PathBuf>> {
    let scene = synth_scene(&cfg.synth_config(), cfg.seed)?;
    create_dir(&layout.output("images"))?;
    let pool = cfg.thread_pool()?;
    let records: Vec<FrameRecord> = pool.install(|| {
        scene
            .frames
            .par_iter()
            .map(|f| {
                let render = scene.render(f);
                let labels = scene.labels(f, &scene.boundaries, Some(&render));
                let name = format!("images/frame_{:04}.ppm", f.index);
                image::write_ppm(&layout.output(&name), &render.image)?;
                let mut r = FrameRecord {
                    frame_id: format!("frame_{:04}", f.index),
                    image: name.into(),
                    camera_id: "front".into(),
                    pose: Some(f.pose),
                    vehicles: Vec::new(),
                    lanes: Vec::new(),
                    radar: f.radar.clone(),
                };
                r.set_labels(&labels);
                Ok(r)
            })
            .collect::<Result<_>>()
    })?;
    let outputs = [MANIFEST, CLOUD, TRAJECTORY, TRUTH_BOUNDARIES].map(|n| layout.output(n));
    write_manifest(&outputs[0], &records)?;
    write_cloud_binary(&outputs[1], &scene.cloud)?;
    write_trajectory(&outputs[2], &scene.trajectory)?;
    write_json(&outputs[3], &scene.boundaries)?;
    Ok(outputs.to_vec())
}

/// Recovers boundaries from the lidar map, applies manual corrections when
/// configured, and relabels the manifest's lanes from the result.
pub fn cmd_autolabel(cfg: &RunConfig, layout: &Layout) -> Result<Vec<PathBuf>> {
    let cloud = read_cloud(&layout.input(&cfg.paths.cloud, CLOUD))?;
    let traj = read_trajectory(&layout.input(&cfg.paths.trajectory, TRAJECTORY))?;
    let mut boundaries = autolabel(&cloud, &traj, &cfg.autolabel)?;
    if let Some(c) = &cfg.paths.corrections {
        apply_corrections(&mut boundaries, &load_corrections(&layout.base.join(c))?)?;
    }
    let mut outputs = vec![layout.output(BOUNDARIES)];
    write_json(&outputs[0], &boundaries)?;
    let manifest = layout.input(&cfg.paths.manifest, MANIFEST);
    if manifest.is_file() {
        let ds = load_dataset(&manifest)?;
        let records = relabel_lanes(cfg, &ds, &boundaries, &layout.out)?;
        let out = layout.output(AUTOLABEL_MANIFEST);
        write_manifest(&out, &records)?;
        outputs.push(out);
    }
    Ok(outputs)
}

/// Replaces every record's lane labels with the projection of `boundaries`
/// at the record's pose. Image paths are rewritten relative to `dest`.
pub fn relabel_lanes(
    cfg: &RunConfig,
    ds: &Dataset,
    boundaries: &[BoundaryPolyline],
    dest: &Path,
) -> Result<Vec<FrameRecord>> {
    ds.records
        .iter()
        .map(|r| {
            let pose = r
                .pose
                .ok_or_else(|| Error::Data(format!("frame {:?} has no pose to project boundaries", r.frame_id)))?;
            let mut out = r.clone();
            out.lanes = boundaries
                .iter()
                .filter_map(|b| project_boundary(b, &pose, &cfg.camera, &cfg.synth.labels, None))
                .collect();
            if ds.root != dest {
                out.image = std::path::absolute(ds.image_path(r)).map_err(|e| Error::io(&r.image, e))?;
            }
            Ok(out)
        })
        .collect()
}

/// Network with the configured architecture and weights from `path`.
pub fn load_network(cfg: &RunConfig, path: &Path) -> Result<Network> {
    let (mut net, _) = init_training(cfg)?;
    load_checkpoint(path, &mut net, cfg.train.momentum)?;
    Ok(net)
}

pub fn cmd_train(cfg: &RunConfig, layout: &Layout) -> Result<TrainOutcome> {
    let ds = load_dataset(&layout.input(&cfg.paths.manifest, MANIFEST))?;
    let samples = load_samples(&ds)?;
    let mut start = init_training(cfg)?;
    if let Some(r) = &cfg.paths.resume {
        if let Some(st) = load_checkpoint(&layout.base.join(r), &mut start.0, cfg.train.momentum)? {
            start.1 = st;
        }
    }
    let outcome = run_train(cfg, &samples, start)?;
    create_dir(&layout.out)?;
    save_checkpoint(&layout.output(CHECKPOINT), &outcome.net, Some(&outcome.optim))?;
    train::write_train_log(&layout.output(TRAIN_LOG), &outcome.epochs)?;
    Ok(outcome)
}

pub fn cmd_infer(cfg: &RunConfig, layout: &Layout) -> Result<Vec<DetectionRecord>> {
    let ds = load_dataset(&layout.input(&cfg.paths.manifest, MANIFEST))?;
    let net = load_network(cfg, &layout.input(&cfg.paths.checkpoint, CHECKPOINT))?;
    let dets = run_infer(&net, cfg, &ds)?;
    create_dir(&layout.out)?;
    write_detections(&layout.output(DETECTIONS), &dets)?;
    Ok(dets)
}

pub fn cmd_eval(cfg: &RunConfig, layout: &Layout) -> Result<crate::eval::EvalReport> {
    let ds = load_dataset(&layout.input(&cfg.paths.manifest, MANIFEST))?;
    let dets = read_detections(&layout.input(&cfg.paths.detections, DETECTIONS))?;
    let report = run_eval(cfg, &ds.records, &dets)?;
    create_dir(&layout.out)?;
    write(&layout.output(REPORT_JSON), report.to_json())?;
    write(&layout.output(REPORT_CSV), report.to_csv())?;
    Ok(report)
}

pub fn cmd_bench(cfg: &RunConfig, layout: &Layout) -> Result<BenchReport> {
    let ds = load_dataset(&layout.input(&cfg.paths.manifest, MANIFEST))?;
    let net = load_network(cfg, &layout.input(&cfg.paths.checkpoint, CHECKPOINT))?;
    let images = ds
        .records
        .iter()
        .map(|r| image::read_ppm(&ds.image_path(r)))
        .collect::<Result<Vec<_>>>()?;
    let report = run_bench(&net, cfg, &images, cfg.bench.repeat)?;
    create_dir(&layout.out)?;
    write_json(&layout.output(BENCH), &report)?;
    Ok(report)
}

/// Network input for an image file.
pub fn load_input(path: &Path) -> Result<Tensor> {
    image::read_ppm(path).map(|i| image::image_to_tensor(&i))
}
