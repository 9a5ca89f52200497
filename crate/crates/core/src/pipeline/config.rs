use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::autolabel::{AutolabelParams, SynthConfig};
use crate::detector::codec::RegressionCodec;
use crate::detector::head::head_channels;
use crate::detector::label::RasterParams;
use crate::detector::loss::LossParams;
use crate::error::{Error, Result};
use crate::eval::EvalParams;
use crate::geometry::{receptive_field, reference_architecture, GridGeometry};
use crate::nn::{LayerKind, LayerSpec, LrSchedule, MomentumSchedule, Padding};
use crate::pipeline::augment::AugmentConfig;
use crate::postprocess::{CameraModel, PostprocessParams};

/// Everything a command needs besides its input files. Unknown keys are
/// rejected and every section falls back to its defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub dataset_id: String,
    pub seed: u64,
    /// Worker threads for frame-level parallelism; 0 uses every core.
    pub workers: usize,
    pub input: InputConfig,
    pub architecture: Vec<LayerSpec>,
    pub camera: CameraModel,
    /// Regression normalization; defaults to the architecture's context size.
    pub codec_scale: Option<f64>,
    pub raster: RasterParams,
    pub train: TrainConfig,
    pub augment: AugmentConfig,
    pub postprocess: PostprocessParams,
    pub eval: EvalParams,
    /// Scene generator settings. Image size and camera are always taken from
    /// `input` and `camera`.
    pub synth: SynthConfig,
    pub autolabel: AutolabelParams,
    pub bench: BenchConfig,
    pub paths: PathsConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputConfig {
    pub width: usize,
    pub height: usize,
    #[serde(default = "default_cell")]
    pub cell_px: usize,
}

fn default_cell() -> usize {
    4
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: u64,
    pub batch_size: usize,
    pub lr: LrSchedule,
    pub momentum: MomentumSchedule,
    /// Uniform init bound is `init_gain / sqrt(fan_in)`.
    pub init_gain: f64,
    pub loss: LossParams,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 20,
            batch_size: 8,
            lr: LrSchedule {
                base: 0.01,
                decay: 0.5,
                every_epochs: 5,
            },
            momentum: MomentumSchedule::default(),
            init_gain: 6f64.sqrt(),
            loss: LossParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub repeat: usize,
    /// Candidate counts for the merge scaling sweep.
    pub merge_sweep: Vec<usize>,
    /// Timed runs per sweep point; the minimum is kept.
    pub sweep_repeat: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            repeat: 5,
            merge_sweep: vec![200, 400, 800, 1600, 3200],
            sweep_repeat: 5,
        }
    }
}

/// Input and output locations. Relative paths resolve against the config
/// file's directory; unset inputs default to what earlier commands write
/// into the output directory.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    pub out_dir: Option<PathBuf>,
    pub manifest: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    /// Checkpoint to resume training from.
    pub resume: Option<PathBuf>,
    pub detections: Option<PathBuf>,
    pub cloud: Option<PathBuf>,
    pub trajectory: Option<PathBuf>,
    pub corrections: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let input = InputConfig {
            width: 640,
            height: 480,
            cell_px: 4,
        };
        let subgrid = 32 / input.cell_px;
        Self {
            dataset_id: "synthetic".into(),
            seed: 0,
            workers: 0,
            input,
            architecture: reference_architecture(subgrid * subgrid * crate::detector::types::CHANNELS_PER_CELL),
            camera: CameraModel {
                focal: 800.0,
                cx: 320.0,
                cy: 240.0,
                height: 1.5,
                pitch: 0.0,
            },
            codec_scale: None,
            raster: RasterParams::default(),
            train: TrainConfig::default(),
            augment: AugmentConfig::default(),
            postprocess: PostprocessParams::default(),
            eval: EvalParams::default(),
            synth: SynthConfig::default(),
            autolabel: AutolabelParams::default(),
            bench: BenchConfig::default(),
            paths: PathsConfig::default(),
        }
    }
}

/// Stride-32 network for 320×240 training on a CPU: five stride-2 stages,
/// then a 3×3 and a 1×1 layer standing in for the fully connected pair, and
/// a 1×1 head. Context 249.
pub fn reduced_architecture(head_channels: usize) -> Vec<LayerSpec> {
    use Padding::Same;
    vec![
        LayerSpec::conv(5, 2, Same, 24),
        LayerSpec::relu(),
        LayerSpec::maxpool(3, 2, Same),
        LayerSpec::conv(3, 1, Same, 48),
        LayerSpec::relu(),
        LayerSpec::maxpool(3, 2, Same),
        LayerSpec::conv(3, 1, Same, 64),
        LayerSpec::relu(),
        LayerSpec::maxpool(3, 2, Same),
        LayerSpec::conv(3, 1, Same, 96),
        LayerSpec::relu(),
        LayerSpec::maxpool(3, 2, Same),
        LayerSpec::conv(3, 1, Same, 128),
        LayerSpec::relu(),
        LayerSpec::conv(3, 1, Same, 256),
        LayerSpec::relu(),
        LayerSpec::conv(1, 1, Same, 256),
        LayerSpec::relu(),
        LayerSpec::conv(1, 1, Same, head_channels),
        LayerSpec::softmax_grid(),
    ]
}

impl RunConfig {
    /// The desk-scale configuration: 320×240 images and the reduced network.
    pub fn desk() -> Self {
        let mut c = Self::default();
        c.input.width = 320;
        c.input.height = 240;
        c.camera = CameraModel {
            focal: 400.0,
            cx: 160.0,
            cy: 120.0,
            height: 1.5,
            pitch: 0.0,
        };
        let s = 32 / c.input.cell_px;
        c.architecture = reduced_architecture(s * s * crate::detector::types::CHANNELS_PER_CELL);
        c
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: RunConfig = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.line(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes") + "\n"
    }

    pub fn validate(&self) -> Result<()> {
        if self.input.width == 0 || self.input.height == 0 || self.input.cell_px == 0 {
            return Err(Error::config(format!("invalid input size {:?}", self.input)));
        }
        if self.architecture.is_empty() {
            return Err(Error::config("architecture is empty"));
        }
        for l in &self.architecture {
            l.validate()?;
        }
        if self.architecture.last().map(|l| l.kind) != Some(LayerKind::SoftmaxGrid) {
            return Err(Error::config("architecture must end with a softmax-grid layer"));
        }
        let g = self.geometry()?;
        let head = self
            .architecture
            .iter()
            .rev()
            .find(|l| l.kind == LayerKind::Conv)
            .ok_or_else(|| Error::config("architecture has no convolution"))?;
        if head.out_channels != head_channels(&g) {
            return Err(Error::config(format!(
                "head conv has {} channels; a {}x{} subgrid needs {}",
                head.out_channels,
                g.subgrid(),
                g.subgrid(),
                head_channels(&g)
            )));
        }
        self.camera.validate()?;
        if let Some(s) = self.codec_scale {
            if !(s.is_finite() && s > 0.0) {
                return Err(Error::config(format!("codec_scale must be positive, got {s}")));
            }
        }
        let t = &self.train;
        if t.batch_size == 0 || t.epochs == 0 {
            return Err(Error::config("train.epochs and train.batch_size must be positive"));
        }
        if !(t.lr.base.is_finite() && t.lr.base > 0.0) || !(t.lr.decay > 0.0 && t.lr.decay <= 1.0) {
            return Err(Error::config(format!("invalid learning rate schedule {:?}", t.lr)));
        }
        t.momentum.validate()?;
        if !(t.init_gain.is_finite() && t.init_gain > 0.0) {
            return Err(Error::config("train.init_gain must be positive"));
        }
        if !(t.loss.lambda_reg >= 0.0) || t.loss.class_weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::config("loss weights must be non-negative"));
        }
        let r = &self.raster;
        if !(0.0..1.0).contains(&r.shrink) || !(r.lane_band_px > 0.0) || !(r.lane_segment_half_px > 0.0) {
            return Err(Error::config(format!("invalid raster parameters {r:?}")));
        }
        self.augment.validate(self.input.width, self.input.height)?;
        self.postprocess.validate()?;
        let e = &self.eval;
        if !(e.iou_min > 0.0 && e.iou_min <= 1.0) || !(e.lane_tol_m > 0.0) || !(e.depth_bin_m > 0.0) {
            return Err(Error::config(format!("invalid eval parameters {e:?}")));
        }
        self.synth_config().validate()?;
        self.autolabel.filter.validate()?;
        if self.bench.repeat == 0 || self.bench.sweep_repeat == 0 {
            return Err(Error::config("bench repeat counts must be positive"));
        }
        Ok(())
    }

    pub fn geometry(&self) -> Result<GridGeometry> {
        GridGeometry::for_network(&self.architecture, self.input.width, self.input.height, self.input.cell_px)
    }

    pub fn codec(&self) -> RegressionCodec {
        let scale = self
            .codec_scale
            .unwrap_or_else(|| receptive_field(&self.architecture).context as f64);
        RegressionCodec::new(scale)
    }

    /// Generator settings with image size and camera taken from this config.
    pub fn synth_config(&self) -> SynthConfig {
        SynthConfig {
            image_width: self.input.width,
            image_height: self.input.height,
            camera: self.camera,
            ..self.synth.clone()
        }
    }

    pub fn worker_count(&self) -> usize {
        std::env::var("HPK_WORKERS")
            .ok()
            .and_then(|v| v.trim().parse().ok())
            .unwrap_or(self.workers)
    }

    pub fn thread_pool(&self) -> Result<rayon::ThreadPool> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.worker_count())
            .build()
            .map_err(|e| Error::config(format!("cannot start worker pool: {e}")))
    }
}

/// Path resolution for one invocation.
#[derive(Debug, Clone)]
pub struct Layout {
    pub base: PathBuf,
    pub out: PathBuf,
}

impl Layout {
    /// `base` is the config file's directory; `out` overrides `paths.out_dir`.
    pub fn new(cfg: &RunConfig, base: &Path, out: Option<&Path>) -> Self {
        let out = match out {
            Some(o) => o.to_path_buf(),
            None => base.join(cfg.paths.out_dir.clone().unwrap_or_else(|| "out".into())),
        };
        Self {
            base: base.to_path_buf(),
            out,
        }
    }

    /// A configured input path, or `default` under the output directory.
    pub fn input(&self, configured: &Option<PathBuf>, default: &str) -> PathBuf {
        match configured {
            Some(p) => self.base.join(p),
            None => self.out.join(default),
        }
    }

    pub fn output(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        let c = RunConfig::default();
        c.validate().unwrap();
        let g = c.geometry().unwrap();
        assert_eq!((g.features_x, g.features_y, g.cells_x(), g.cells_y()), (20, 15, 160, 120));
        assert_eq!(c.codec().scale, 355.0);
        let d = RunConfig::desk();
        d.validate().unwrap();
        let rf = receptive_field(&d.architecture);
        assert_eq!((rf.stride, rf.context), (32, 249));
    }

    #[test]
    fn round_trip_and_unknown_keys() {
        let c = RunConfig::desk();
        let back: RunConfig = serde_json::from_str(&c.to_json()).unwrap();
        assert_eq!(back, c);
        assert!(serde_json::from_str::<RunConfig>(r#"{"bogus": 1}"#).is_err());
        assert!(serde_json::from_str::<RunConfig>(r#"{"train": {"epoch": 3}}"#).is_err());
        let partial: RunConfig = serde_json::from_str(r#"{"seed": 7}"#).unwrap();
        assert_eq!(partial.seed, 7);
        assert_eq!(partial.architecture, RunConfig::default().architecture);
    }

    #[test]
    fn head_mismatch_rejected() {
        let mut c = RunConfig::desk();
        let n = c.architecture.len();
        c.architecture[n - 2].out_channels = 10;
        assert!(matches!(c.validate(), Err(Error::Config(_))));
    }
}
