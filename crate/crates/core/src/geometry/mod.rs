//! Receptive-field and stride arithmetic for the dense ("sliding window")
//! network, and the mapping from final features to 4×4-pixel mask cells.

mod grid;
mod verify;

pub use grid::{GridGeometry, MaskCell};
pub use verify::{perturbation_context, random_architecture, verify_receptive_field};

use crate::error::{Error, Result};
use crate::nn::layer::{LayerKind, LayerSpec, Padding};

/// Input region seen by one final feature, and the spacing between features.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReceptiveField {
    /// Side of the square context view in pixels.
    pub context: usize,
    /// Pixel distance between adjacent final features.
    pub stride: usize,
    /// Center of feature (0, 0)'s context view, in pixels from the image origin.
    pub offset: f64,
}

/// Padding before the input when every layer's input is a multiple of its stride.
fn nominal_pad_before(spec: &LayerSpec) -> usize {
    match spec.padding {
        Padding::Pixels(p) => p,
        Padding::Same => spec.kernel.saturating_sub(spec.stride) / 2,
    }
}

/// `r <- r + (k-1)·jump; jump <- jump·s` over the spatial layers.
pub fn receptive_field(layers: &[LayerSpec]) -> ReceptiveField {
    let (mut r, mut jump, mut start) = (1usize, 1usize, 0isize);
    for l in layers.iter().filter(|l| l.is_spatial()) {
        start -= (nominal_pad_before(l) * jump) as isize;
        r += (l.kernel - 1) * jump;
        jump *= l.stride;
    }
    ReceptiveField {
        context: r,
        stride: jump,
        offset: start as f64 + (r as f64 - 1.0) / 2.0,
    }
}

/// Exact `[start, end)` pixel span seen by feature `index` along one axis of length `input`.
/// The span may extend past the image where the network pads.
pub fn context_span(layers: &[LayerSpec], input: usize, index: usize) -> Result<(isize, isize)> {
    let (mut r, mut jump, mut start, mut extent) = (1usize, 1usize, 0isize, input);
    for l in layers.iter().filter(|l| l.is_spatial()) {
        let res = l.resolve(extent)?;
        start -= (res.pad_before * jump) as isize;
        r += (l.kernel - 1) * jump;
        jump *= l.stride;
        extent = res.output;
    }
    if index >= extent {
        return Err(Error::config(format!(
            "feature index {index} outside output extent {extent}"
        )));
    }
    let s = start + (index * jump) as isize;
    Ok((s, s + r as isize))
}

/// Input pixels `[start, end)` that actually influence feature `index` along
/// one axis. Unlike [`context_span`] this clips at every layer, so samples
/// that only exist as padding, or that an earlier layer's rounding dropped,
/// are excluded.
pub fn visible_span(layers: &[LayerSpec], input: usize, index: usize) -> Result<(usize, usize)> {
    let mut stages = Vec::new();
    let mut extent = input;
    for l in layers.iter().filter(|l| l.is_spatial()) {
        let res = l.resolve(extent)?;
        stages.push((extent, l.kernel, l.stride, res.pad_before));
        extent = res.output;
    }
    if index >= extent {
        return Err(Error::config(format!(
            "feature index {index} outside output extent {extent}"
        )));
    }
    let (mut lo, mut hi) = (index as isize, index as isize + 1);
    for &(n, k, s, pad) in stages.iter().rev() {
        let (s, pad, k) = (s as isize, pad as isize, k as isize);
        lo = (lo * s - pad).max(0);
        hi = ((hi - 1) * s - pad + k).min(n as isize);
        if lo >= hi {
            return Ok((0, 0));
        }
    }
    Ok((lo as usize, hi as usize))
}

/// Extent of one axis after all layers.
pub fn output_extent(layers: &[LayerSpec], input: usize) -> Result<usize> {
    layers.iter().try_fold(input, |n, l| l.resolve(n).map(|r| r.output))
}

/// Final feature grid `(W', H')` for a `W×H` input.
pub fn dense_output_grid(width: usize, height: usize, layers: &[LayerSpec]) -> Result<(usize, usize)> {
    Ok((output_extent(layers, width)?, output_extent(layers, height)?))
}

/// AlexNet-style layer table with the fully connected layers converted to
/// convolutions. Stride 32, context 355; 640×480 input gives a 20×15 grid.
///
/// `head_channels` is the channel count of the final per-cell prediction conv.
pub fn reference_architecture(head_channels: usize) -> Vec<LayerSpec> {
    use Padding::Same;
    vec![
        LayerSpec::conv(11, 4, Same, 96),
        LayerSpec::relu(),
        LayerSpec::maxpool(3, 2, Same),
        LayerSpec::conv(5, 1, Same, 256),
        LayerSpec::relu(),
        LayerSpec::maxpool(3, 2, Same),
        LayerSpec::conv(3, 1, Same, 384),
        LayerSpec::relu(),
        LayerSpec::conv(3, 1, Same, 384),
        LayerSpec::relu(),
        LayerSpec::conv(3, 1, Same, 256),
        LayerSpec::relu(),
        LayerSpec::maxpool(3, 2, Same),
        // fc6 as a 6×6 convolution over the pooled map
        LayerSpec::conv(6, 1, Same, 4096),
        LayerSpec::relu(),
        LayerSpec::conv(1, 1, Same, 4096),
        LayerSpec::relu(),
        LayerSpec::conv(1, 1, Same, head_channels),
        LayerSpec {
            kind: LayerKind::SoftmaxGrid,
            ..LayerSpec::relu()
        },
    ]
}

/// The reference table with every padding set to zero.
pub fn unpadded(layers: &[LayerSpec]) -> Vec<LayerSpec> {
    layers
        .iter()
        .map(|l| LayerSpec {
            padding: Padding::Pixels(0),
            ..*l
        })
        .collect()
}
