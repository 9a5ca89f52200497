use serde::{Deserialize, Serialize};

use crate::detector::codec::RegressionCodec;
use crate::detector::head::{channel_index, check_output};
use crate::detector::types::{GridLabel, LANE, LANE_REG, NUM_CLASSES, VEHICLE, VEHICLE_REG};
use crate::error::{Error, Result};
use crate::nn::loss::softmax_cross_entropy_into;
use crate::nn::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossParams {
    /// Weight of the masked L1 regression term.
    pub lambda_reg: f64,
    /// Per-class weights of the cross-entropy term (background, vehicle, lane).
    #[serde(default = "unit_weights")]
    pub class_weights: [f64; NUM_CLASSES],
}

fn unit_weights() -> [f64; NUM_CLASSES] {
    [1.0; NUM_CLASSES]
}

impl Default for LossParams {
    fn default() -> Self {
        Self {
            lambda_reg: 1.0,
            class_weights: unit_weights(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct DetectionLoss {
    pub total: f64,
    pub classification: f64,
    /// Already multiplied by `lambda_reg`.
    pub regression: f64,
    /// Gradient with respect to the raw head output.
    pub grad: Vec<f32>,
}

/// Weighted mean per-cell cross-entropy plus `lambda_reg` times the masked L1
/// over the active head of every supervised cell, normalized by the number
/// of supervised regression values.
pub fn detection_loss(
    output: &Tensor,
    label: &GridLabel,
    codec: &RegressionCodec,
    params: &LossParams,
) -> Result<DetectionLoss> {
    let g = &label.geometry;
    check_output(output, g)?;
    let data = output.data();
    let mut grad = vec![0.0f32; data.len()];

    let weight_sum: f64 = label
        .cell_class
        .iter()
        .map(|&c| params.class_weights[c as usize])
        .sum();
    if weight_sum <= 0.0 {
        return Err(Error::config("class weights sum to zero over the grid"));
    }
    let reg_count: usize = label
        .cell_class
        .iter()
        .zip(&label.reg_mask)
        .map(|(&c, &m)| match (m, c) {
            (true, VEHICLE) => VEHICLE_REG,
            (true, LANE) => LANE_REG,
            _ => 0,
        })
        .sum();

    let mut ce_sum = 0.0f64;
    let mut l1_sum = 0.0f64;
    let mut logits = [0.0f32; NUM_CLASSES];
    let mut lg = [0.0f32; NUM_CLASSES];
    let reg_scale = if reg_count > 0 {
        params.lambda_reg / reg_count as f64
    } else {
        0.0
    };
    for gy in 0..g.cells_y() {
        for gx in 0..g.cells_x() {
            let idx = g.index(gx, gy);
            let class = label.cell_class[idx];
            let w = params.class_weights[class as usize] / weight_sum;
            for (j, l) in logits.iter_mut().enumerate() {
                *l = data[channel_index(g, gx, gy, j)];
            }
            let ce = softmax_cross_entropy_into(&logits, class as usize, &mut lg)?;
            ce_sum += w * ce;
            for (j, v) in lg.iter().enumerate() {
                grad[channel_index(g, gx, gy, j)] = (*v as f64 * w) as f32;
            }
            if !label.reg_mask[idx] {
                continue;
            }
            let center = g.cell(gx, gy).center();
            let (offset, target): (usize, Vec<f32>) = match class {
                VEHICLE => (NUM_CLASSES, codec.encode_vehicle(center, &label.vehicle_targets[idx]).to_vec()),
                LANE => (NUM_CLASSES + VEHICLE_REG, codec.encode_lane(center, &label.lane_targets[idx]).to_vec()),
                _ => continue,
            };
            for (j, t) in target.iter().enumerate() {
                let k = channel_index(g, gx, gy, offset + j);
                let d = data[k] as f64 - *t as f64;
                l1_sum += d.abs();
                grad[k] = if d > 0.0 {
                    reg_scale as f32
                } else if d < 0.0 {
                    -reg_scale as f32
                } else {
                    0.0
                };
            }
        }
    }
    let regression = l1_sum * reg_scale;
    let total = ce_sum + regression;
    if !total.is_finite() {
        return Err(Error::numeric("detection loss is not finite"));
    }
    Ok(DetectionLoss {
        total,
        classification: ce_sum,
        regression,
        grad,
    })
}

/// Head output that decodes exactly to `label`: one-hot logits of magnitude
/// `confidence` and encoded regression targets. Cells without supervision get
/// zero regression outputs.
pub fn perfect_output(label: &GridLabel, codec: &RegressionCodec, confidence: f32) -> Tensor {
    let g = &label.geometry;
    let shape = [crate::detector::head::head_channels(g), g.features_y, g.features_x];
    let mut t = Tensor::zeros(&shape);
    let data = t.data_mut();
    for gy in 0..g.cells_y() {
        for gx in 0..g.cells_x() {
            let idx = g.index(gx, gy);
            let class = label.cell_class[idx] as usize;
            for j in 0..NUM_CLASSES {
                data[channel_index(g, gx, gy, j)] = if j == class { confidence } else { -confidence };
            }
            if !label.reg_mask[idx] {
                continue;
            }
            let center = g.cell(gx, gy).center();
            match label.cell_class[idx] {
                VEHICLE => {
                    for (j, v) in codec.encode_vehicle(center, &label.vehicle_targets[idx]).iter().enumerate() {
                        data[channel_index(g, gx, gy, NUM_CLASSES + j)] = *v;
                    }
                }
                LANE => {
                    for (j, v) in codec.encode_lane(center, &label.lane_targets[idx]).iter().enumerate() {
                        data[channel_index(g, gx, gy, NUM_CLASSES + VEHICLE_REG + j)] = *v;
                    }
                }
                _ => {}
            }
        }
    }
    t
}
