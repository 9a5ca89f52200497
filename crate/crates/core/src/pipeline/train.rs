//! Mini-batch SGD over a dataset with deterministic data parallelism.

use std::path::Path;

use image::RgbImage;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autolabel::FrameLabels;
use crate::detector::label::rasterize_labels;
use crate::detector::loss::detection_loss;
use crate::detector::types::GridLabel;
use crate::error::{Error, Result};
use crate::nn::{sgd_momentum_step, Network, OptimState, Tensor};
use crate::pipeline::augment::{augment, AugmentMode};
use crate::pipeline::config::RunConfig;
use crate::pipeline::dataset::Dataset;
use crate::pipeline::image::{image_to_tensor, read_ppm};

/// A decoded training frame.
#[derive(Debug, Clone)]
pub struct Sample {
    pub image: RgbImage,
    pub labels: FrameLabels,
}

pub fn load_samples(ds: &Dataset) -> Result<Vec<Sample>> {
    ds.records
        .iter()
        .map(|r| {
            Ok(Sample {
                image: read_ppm(&ds.image_path(r))?,
                labels: r.labels(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: u64,
    pub steps: u64,
    pub learning_rate: f64,
    pub loss: f64,
    pub classification: f64,
    pub regression: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub net: Network,
    pub optim: OptimState,
    pub epochs: Vec<EpochLog>,
    /// Mean batch loss of every step run by this call.
    pub step_losses: Vec<f64>,
}

struct Prepared {
    input: Tensor,
    label: GridLabel,
}

/// Fresh network and optimizer from the config seed.
pub fn init_training(cfg: &RunConfig) -> Result<(Network, OptimState)> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let net = Network::new(&cfg.architecture, 3, cfg.train.init_gain, &mut rng)?;
    let params: Vec<&Tensor> = net.params().into_iter().map(|(_, t)| t).collect();
    let optim = OptimState::new(&params, cfg.train.lr.at_epoch(0), cfg.train.momentum);
    Ok((net, optim))
}

/// Trains until `cfg.train.epochs` epochs are complete, continuing from
/// `optim.step_count` when resuming.
///
/// Sample order and augmentation depend only on the seed, epoch and sample
/// index, and per-item gradients are reduced in batch order, so the result
/// does not depend on the worker count.
pub fn run_train(cfg: &RunConfig, samples: &[Sample], start: (Network, OptimState)) -> Result<TrainOutcome> {
    if samples.is_empty() {
        return Err(Error::Data("training set is empty".into()));
    }
    let (mut net, mut optim) = start;
    let geometry = cfg.geometry()?;
    let codec = cfg.codec();
    let pool = cfg.thread_pool()?;
    let (w, h) = (cfg.input.width as u32, cfg.input.height as u32);
    for (i, s) in samples.iter().enumerate() {
        if s.image.dimensions() != (w, h) {
            return Err(Error::Data(format!(
                "sample {i} is {:?}, config expects {w}x{h}",
                s.image.dimensions()
            )));
        }
    }
    let prepare = |s: &Sample, mode: AugmentMode| -> Result<Prepared> {
        let (img, labels) = match mode {
            AugmentMode::Identity => (s.image.clone(), s.labels.clone()),
            m => augment(&s.image, &s.labels, m, &cfg.augment)?,
        };
        let (label, _) = rasterize_labels(&labels.vehicles, &labels.lanes, &geometry, &cfg.raster);
        Ok(Prepared {
            input: image_to_tensor(&img),
            label,
        })
    };
    let plain: Vec<Prepared> = pool.install(|| {
        samples
            .par_iter()
            .map(|s| prepare(s, AugmentMode::Identity))
            .collect::<Result<_>>()
    })?;

    for p in net.params_mut() {
        p.enable_grad();
    }
    let bs = cfg.train.batch_size;
    let per_epoch = samples.len().div_ceil(bs) as u64;
    let total = cfg.train.epochs * per_epoch;
    let mut epochs = Vec::new();
    let mut step_losses = Vec::new();
    let mut acc = [0.0f64; 3];
    let mut acc_steps = 0u64;
    let mut order: Vec<usize> = Vec::new();
    let mut order_epoch = u64::MAX;

    while optim.step_count < total {
        let t = optim.step_count;
        let epoch = t / per_epoch;
        if epoch != order_epoch {
            order = (0..samples.len()).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(u64::MAX - epoch);
            order.shuffle(&mut rng);
            order_epoch = epoch;
        }
        let b = (t % per_epoch) as usize;
        let batch = &order[b * bs..((b + 1) * bs).min(order.len())];
        let net_ref = &net;
        let results: Vec<(f64, f64, f64, Vec<Vec<f32>>)> = pool.install(|| {
            batch
                .par_iter()
                .map(|&i| {
                    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                    rng.set_stream((epoch << 32) | i as u64);
                    let mode = cfg.augment.sample(&mut rng);
                    let owned;
                    let p = if mode == AugmentMode::Identity {
                        &plain[i]
                    } else {
                        owned = prepare(&samples[i], mode)?;
                        &owned
                    };
                    let (out, cache) = net_ref.forward_train(&p.input)?;
                    let l = detection_loss(&out, &p.label, &codec, &cfg.train.loss)?;
                    let g = net_ref.backward(&cache, &l.grad)?;
                    Ok((l.total, l.classification, l.regression, g))
                })
                .collect::<Result<_>>()
        })?;
        let n = results.len() as f32;
        let mut params = net.params_mut();
        for p in params.iter_mut() {
            p.zero_grad();
        }
        let mut losses = [0.0f64; 3];
        for (total_loss, cls, reg, grads) in &results {
            losses[0] += total_loss;
            losses[1] += cls;
            losses[2] += reg;
            for (p, g) in params.iter_mut().zip(grads) {
                p.accumulate_grad(g)?;
            }
        }
        for p in params.iter_mut() {
            if let Some(g) = p.grad_mut() {
                g.iter_mut().for_each(|v| *v /= n);
            }
        }
        let mean = losses.map(|l| l / n as f64);
        if !mean[0].is_finite() {
            return Err(Error::numeric(format!("loss is {} at step {t}", mean[0])));
        }
        optim.learning_rate = cfg.train.lr.at_epoch(epoch);
        sgd_momentum_step(&mut params, &mut optim)?;
        step_losses.push(mean[0]);
        for k in 0..3 {
            acc[k] += mean[k];
        }
        acc_steps += 1;
        if optim.step_count % per_epoch == 0 {
            let log = EpochLog {
                epoch,
                steps: optim.step_count,
                learning_rate: optim.learning_rate,
                loss: acc[0] / acc_steps as f64,
                classification: acc[1] / acc_steps as f64,
                regression: acc[2] / acc_steps as f64,
            };
            log::info!(
                "epoch {} step {} lr {:.3e} loss {:.5} (cls {:.5}, reg {:.5})",
                log.epoch,
                log.steps,
                log.learning_rate,
                log.loss,
                log.classification,
                log.regression
            );
            epochs.push(log);
            acc = [0.0; 3];
            acc_steps = 0;
        }
    }
    for p in net.params_mut() {
        p.disable_grad();
    }
    Ok(TrainOutcome {
        net,
        optim,
        epochs,
        step_losses,
    })
}

pub fn write_train_log(path: &Path, epochs: &[EpochLog]) -> Result<()> {
    let mut s = String::new();
    for e in epochs {
        s.push_str(&serde_json::to_string(e).expect("log serializes"));
        s.push('\n');
    }
    std::fs::write(path, s).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detector::types::VehicleBox;
    use crate::geometry::GridGeometry;
    use crate::nn::checkpoint::checkpoint_file;
    use crate::nn::{LayerSpec, Padding};
    use crate::rect::Rect;

    /// 64×64 frames, stride-16 network with 4 px cells.
    fn tiny_config() -> RunConfig {
        let mut c = RunConfig::desk();
        c.input.width = 64;
        c.input.height = 64;
        c.camera.cx = 32.0;
        c.camera.cy = 32.0;
        c.architecture = vec![
            LayerSpec::conv(3, 2, Padding::Same, 6),
            LayerSpec::relu(),
            LayerSpec::maxpool(2, 2, Padding::Same),
            LayerSpec::conv(3, 2, Padding::Same, 8),
            LayerSpec::relu(),
            LayerSpec::maxpool(2, 2, Padding::Same),
            LayerSpec::conv(1, 1, Padding::Same, 4 * 4 * 14),
            LayerSpec::softmax_grid(),
        ];
        c.train.epochs = 3;
        c.train.batch_size = 2;
        c.train.lr.base = 0.05;
        c.augment.identity_prob = 0.5;
        c.workers = 2;
        c
    }

    fn samples() -> Vec<Sample> {
        (0..3)
            .map(|k| {
                let x = 8.0 + 10.0 * k as f64;
                let image = RgbImage::from_fn(64, 64, |u, v| {
                    let inside = (u as f64) >= x && (u as f64) < x + 24.0 && (16..40).contains(&v);
                    if inside {
                        image::Rgb([220, 30, 30])
                    } else {
                        image::Rgb([90, 90, 90])
                    }
                });
                Sample {
                    image,
                    labels: FrameLabels {
                        vehicles: vec![VehicleBox::truth(Rect::new(x, 16.0, x + 24.0, 40.0), 12.0)],
                        lanes: Vec::new(),
                    },
                }
            })
            .collect()
    }

    #[test]
    fn tiny_config_is_valid() {
        let c = tiny_config();
        c.validate().unwrap();
        let g: GridGeometry = c.geometry().unwrap();
        assert_eq!((g.features_x, g.subgrid()), (4, 4));
    }

    #[test]
    fn deterministic_across_workers_and_resume() {
        let cfg = tiny_config();
        let s = samples();
        let a = run_train(&cfg, &s, init_training(&cfg).unwrap()).unwrap();
        let mut one = cfg.clone();
        one.workers = 1;
        let b = run_train(&one, &s, init_training(&one).unwrap()).unwrap();
        let bytes = |o: &TrainOutcome| checkpoint_file(&o.net, Some(&o.optim)).encode().unwrap();
        assert_eq!(bytes(&a), bytes(&b));
        assert_eq!(a.optim.step_count, 6);
        assert_eq!(a.epochs.len(), 3);

        let mut short = cfg.clone();
        short.train.epochs = 1;
        let first = run_train(&short, &s, init_training(&short).unwrap()).unwrap();
        assert_eq!(first.optim.step_count, 2);
        let rest = run_train(&cfg, &s, (first.net, first.optim)).unwrap();
        assert_eq!(rest.step_losses.len(), 4);
        assert_eq!(bytes(&rest), bytes(&a));
    }

    #[test]
    fn empty_or_mismatched_data_rejected() {
        let cfg = tiny_config();
        assert!(run_train(&cfg, &[], init_training(&cfg).unwrap()).is_err());
        let mut s = samples();
        s[0].image = RgbImage::new(32, 32);
        assert!(run_train(&cfg, &s, init_training(&cfg).unwrap()).is_err());
    }
}
