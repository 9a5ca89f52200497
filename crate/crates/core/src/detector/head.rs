//! Layout of the final conv output and its decoding into a [`DetectionGrid`].
//!
//! Feature `(fx, fy)` carries `subgrid²` blocks of [`CHANNELS_PER_CELL`]
//! channels; block `sy * subgrid + sx` belongs to cell
//! `(fx * subgrid + sx, fy * subgrid + sy)` and holds three class logits, the
//! five vehicle values and the six lane values, all in codec space.

use crate::detector::codec::RegressionCodec;
use crate::detector::types::{
    CellPrediction, DetectionGrid, CHANNELS_PER_CELL, LANE_REG, NUM_CLASSES, VEHICLE_REG,
};
use crate::error::{Error, Result};
use crate::geometry::GridGeometry;
use crate::nn::loss::softmax;
use crate::nn::network::Network;
use crate::nn::tensor::Tensor;

/// Channels the head conv must produce for this geometry.
pub fn head_channels(geometry: &GridGeometry) -> usize {
    geometry.subgrid() * geometry.subgrid() * CHANNELS_PER_CELL
}

/// Flat offset of channel `j` of cell `(gx, gy)` in a `C×Fy×Fx` output tensor.
pub fn channel_index(geometry: &GridGeometry, gx: usize, gy: usize, j: usize) -> usize {
    let s = geometry.subgrid();
    let (fx, fy, sx, sy) = geometry.owner(gx, gy);
    let ch = (sy * s + sx) * CHANNELS_PER_CELL + j;
    (ch * geometry.features_y + fy) * geometry.features_x + fx
}

pub fn check_output(output: &Tensor, geometry: &GridGeometry) -> Result<()> {
    let expected = [head_channels(geometry), geometry.features_y, geometry.features_x];
    if output.shape() != expected {
        return Err(Error::config(format!(
            "head output shape {:?} does not match grid {:?}",
            output.shape(),
            expected
        )));
    }
    Ok(())
}

/// Per-cell softmax and regression decoding.
pub fn decode_output(output: &Tensor, geometry: &GridGeometry, codec: &RegressionCodec) -> Result<DetectionGrid> {
    check_output(output, geometry)?;
    let data = output.data();
    let mut cells = Vec::with_capacity(geometry.cell_count());
    let mut raw = [0.0f32; CHANNELS_PER_CELL];
    for gy in 0..geometry.cells_y() {
        for gx in 0..geometry.cells_x() {
            for (j, r) in raw.iter_mut().enumerate() {
                *r = data[channel_index(geometry, gx, gy, j)];
            }
            let center = geometry.cell(gx, gy).center();
            let p = softmax(&raw[..NUM_CLASSES]);
            let mut probs = [0.0f32; NUM_CLASSES];
            for (d, s) in probs.iter_mut().zip(&p) {
                *d = *s as f32;
            }
            let v = &raw[NUM_CLASSES..NUM_CLASSES + VEHICLE_REG];
            let l = &raw[NUM_CLASSES + VEHICLE_REG..NUM_CLASSES + VEHICLE_REG + LANE_REG];
            cells.push(CellPrediction {
                probs,
                vehicle: codec.decode_vehicle(center, v),
                lane: codec.decode_lane(center, l),
            });
        }
    }
    Ok(DetectionGrid {
        geometry: *geometry,
        cells,
    })
}

/// One dense forward pass over a `3×H×W` image.
pub fn forward_detect(
    image: &Tensor,
    net: &Network,
    geometry: &GridGeometry,
    codec: &RegressionCodec,
) -> Result<DetectionGrid> {
    let expected = [net.in_channels(), geometry.image_height, geometry.image_width];
    if image.shape() != expected {
        return Err(Error::config(format!(
            "image tensor {:?} does not match the configured input {:?}",
            image.shape(),
            expected
        )));
    }
    let out = net.forward(image)?;
    decode_output(&out, geometry, codec)
}
