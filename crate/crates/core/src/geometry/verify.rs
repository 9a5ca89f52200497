use rand::Rng;

use crate::error::{Error, Result};
use crate::geometry::{dense_output_grid, visible_span};
use crate::nn::layer::{LayerKind, LayerSpec, Padding};
use crate::nn::network::Network;
use crate::nn::tensor::Tensor;

/// A random conv/pool/relu stack with `stride <= kernel` on every layer,
/// so receptive fields have no gaps.
pub fn random_architecture<R: Rng>(rng: &mut R) -> Vec<LayerSpec> {
    let n = rng.gen_range(2..=5);
    let mut layers = Vec::new();
    for i in 0..n {
        let kernel = rng.gen_range(1..=5);
        let stride = rng.gen_range(1..=kernel.min(2));
        let padding = if rng.gen_bool(0.5) {
            Padding::Same
        } else {
            Padding::Pixels(rng.gen_range(0..kernel))
        };
        if i > 0 && rng.gen_bool(0.3) {
            layers.push(LayerSpec::maxpool(kernel.max(2), stride, padding));
        } else {
            layers.push(LayerSpec::conv(kernel, stride, padding, rng.gen_range(1..=3)));
            layers.push(LayerSpec::relu());
        }
    }
    layers
}

/// Brute-force context views: for every final feature, the set of input
/// pixels (`y * width + x`) whose perturbation changes that feature.
///
/// Weights are strictly positive and biases zero, and the baseline input is
/// all zeros, so the baseline output is exactly zero and a unit pulse moves
/// every feature that can see it.
pub fn perturbation_context<R: Rng>(
    layers: &[LayerSpec],
    in_channels: usize,
    width: usize,
    height: usize,
    rng: &mut R,
) -> Result<Vec<Vec<usize>>> {
    let mut net = Network::new(layers, in_channels, 1.0, rng)?;
    for p in net.params_mut() {
        let is_bias = p.rank() == 1;
        for v in p.data_mut() {
            *v = if is_bias { 0.0 } else { rng.gen_range(0.1f32..1.0) };
        }
    }
    let (fw, fh) = dense_output_grid(width, height, layers)?;
    let plane = width * height;
    let mut seen = vec![Vec::new(); fw * fh];
    let mut input = Tensor::zeros(&[in_channels, height, width]);
    for pixel in 0..plane {
        for c in 0..in_channels {
            input.data_mut()[c * plane + pixel] = 1.0;
        }
        let out = net.forward(&input)?;
        let oc = out.len() / (fw * fh);
        for (f, s) in seen.iter_mut().enumerate() {
            if (0..oc).any(|c| out.data()[c * fw * fh + f] != 0.0) {
                s.push(pixel);
            }
        }
        for c in 0..in_channels {
            input.data_mut()[c * plane + pixel] = 0.0;
        }
    }
    Ok(seen)
}

/// Checks [`visible_span`] against [`perturbation_context`] with exact set
/// equality.
pub fn verify_receptive_field<R: Rng>(
    layers: &[LayerSpec],
    in_channels: usize,
    width: usize,
    height: usize,
    rng: &mut R,
) -> Result<bool> {
    if layers.iter().any(|l| l.kind == LayerKind::Conv && l.stride > l.kernel) {
        return Err(Error::config(
            "receptive-field check needs stride <= kernel on every conv",
        ));
    }
    let seen = perturbation_context(layers, in_channels, width, height, rng)?;
    let (fw, fh) = dense_output_grid(width, height, layers)?;
    for fy in 0..fh {
        let (y0, y1) = visible_span(layers, height, fy)?;
        for fx in 0..fw {
            let (x0, x1) = visible_span(layers, width, fx)?;
            let mut expected = Vec::new();
            for y in y0..y1 {
                for x in x0..x1 {
                    expected.push(y * width + x);
                }
            }
            if expected != seen[fy * fw + fx] {
                return Ok(false);
            }
        }
    }
    Ok(true)
}
