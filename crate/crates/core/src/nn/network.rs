use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::activation::{relu_backward, relu_forward};
use crate::nn::conv::{conv2d, conv2d_backward, conv2d_forward, ConvCache};
use crate::nn::layer::{LayerKind, LayerSpec};
use crate::nn::pool::{maxpool2d, maxpool2d_backward, maxpool2d_forward, PoolCache};
use crate::nn::tensor::Tensor;

#[derive(Debug, Clone, PartialEq)]
enum Layer {
    Conv {
        spec: LayerSpec,
        weights: Tensor,
        bias: Tensor,
    },
    Pool(LayerSpec),
    Relu,
    SoftmaxGrid,
}

#[derive(Debug, Clone)]
enum LayerCache {
    Conv(ConvCache),
    Pool(PoolCache),
    Relu(Tensor),
    Identity,
}

/// Activations recorded by [`Network::forward_train`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    layers: Vec<LayerCache>,
}

/// A fixed sequence of conv / pool / relu layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    specs: Vec<LayerSpec>,
    in_channels: usize,
    layers: Vec<Layer>,
}

impl Network {
    /// Uniform init in `±gain/sqrt(fan_in)`, zero biases.
    pub fn new<R: Rng>(specs: &[LayerSpec], in_channels: usize, gain: f64, rng: &mut R) -> Result<Self> {
        let mut layers = Vec::with_capacity(specs.len());
        let mut channels = in_channels;
        for (i, spec) in specs.iter().enumerate() {
            spec.validate()?;
            let layer = match spec.kind {
                LayerKind::Conv => {
                    let k = spec.kernel;
                    let fan_in = (channels * k * k) as f64;
                    let bound = gain / fan_in.sqrt();
                    let weights = Tensor::from_fn(&[spec.out_channels, channels, k, k], |_| {
                        rng.gen_range(-bound..=bound) as f32
                    });
                    channels = spec.out_channels;
                    Layer::Conv {
                        spec: *spec,
                        weights,
                        bias: Tensor::zeros(&[spec.out_channels]),
                    }
                }
                LayerKind::Maxpool => Layer::Pool(*spec),
                LayerKind::Relu => Layer::Relu,
                LayerKind::SoftmaxGrid => {
                    if i + 1 != specs.len() {
                        return Err(Error::config("softmax-grid must be the last layer"));
                    }
                    Layer::SoftmaxGrid
                }
            };
            layers.push(layer);
        }
        Ok(Self {
            specs: specs.to_vec(),
            in_channels,
            layers,
        })
    }

    pub fn specs(&self) -> &[LayerSpec] {
        &self.specs
    }

    pub fn in_channels(&self) -> usize {
        self.in_channels
    }

    /// Channel count of the final output.
    pub fn out_channels(&self) -> usize {
        self.layers
            .iter()
            .rev()
            .find_map(|l| match l {
                Layer::Conv { spec, .. } => Some(spec.out_channels),
                _ => None,
            })
            .unwrap_or(self.in_channels)
    }

    /// `(C, H, W)` after every layer, starting with the input.
    pub fn shape_trace(&self, h: usize, w: usize) -> Result<Vec<(usize, usize, usize)>> {
        let mut shapes = vec![(self.in_channels, h, w)];
        let (mut c, mut h, mut w) = (self.in_channels, h, w);
        for spec in &self.specs {
            h = spec.resolve(h)?.output;
            w = spec.resolve(w)?.output;
            if spec.kind == LayerKind::Conv {
                c = spec.out_channels;
            }
            shapes.push((c, h, w));
        }
        Ok(shapes)
    }

    pub fn forward(&self, input: &Tensor) -> Result<Tensor> {
        self.check_input(input)?;
        let mut x = input.clone();
        for layer in &self.layers {
            x = match layer {
                Layer::Conv { spec, weights, bias } => conv2d(&x, weights, bias, spec)?,
                Layer::Pool(spec) => maxpool2d(&x, spec)?,
                Layer::Relu => relu_forward(&x),
                Layer::SoftmaxGrid => x,
            };
        }
        Ok(x)
    }

    pub fn forward_train(&self, input: &Tensor) -> Result<(Tensor, ForwardCache)> {
        self.check_input(input)?;
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut x = input.clone();
        for layer in &self.layers {
            x = match layer {
                Layer::Conv { spec, weights, bias } => {
                    let (y, c) = conv2d_forward(&x, weights, bias, spec)?;
                    caches.push(LayerCache::Conv(c));
                    y
                }
                Layer::Pool(spec) => {
                    let (y, c) = maxpool2d_forward(&x, spec)?;
                    caches.push(LayerCache::Pool(c));
                    y
                }
                Layer::Relu => {
                    let y = relu_forward(&x);
                    caches.push(LayerCache::Relu(y.clone()));
                    y
                }
                Layer::SoftmaxGrid => {
                    caches.push(LayerCache::Identity);
                    x
                }
            };
        }
        Ok((x, ForwardCache { layers: caches }))
    }

    /// Parameter gradients (in [`Network::params`] order) for the given output gradient.
    pub fn backward(&self, cache: &ForwardCache, grad_out: &[f32]) -> Result<Vec<Vec<f32>>> {
        self.backward_full(cache, grad_out, false).map(|(g, _)| g)
    }

    /// Like [`Network::backward`], optionally returning the input gradient too.
    pub fn backward_full(
        &self,
        cache: &ForwardCache,
        grad_out: &[f32],
        need_input_grad: bool,
    ) -> Result<(Vec<Vec<f32>>, Option<Vec<f32>>)> {
        if cache.layers.len() != self.layers.len() {
            return Err(Error::config("forward cache does not belong to this network"));
        }
        let first_conv = self
            .layers
            .iter()
            .position(|l| matches!(l, Layer::Conv { .. }));
        let mut grads: Vec<Vec<f32>> = Vec::new();
        let mut g = grad_out.to_vec();
        for (i, (layer, c)) in self.layers.iter().zip(&cache.layers).enumerate().rev() {
            match (layer, c) {
                (Layer::Conv { weights, .. }, LayerCache::Conv(cc)) => {
                    let need = need_input_grad || first_conv.is_some_and(|f| f < i);
                    let cg = conv2d_backward(cc, weights, &g, need)?;
                    grads.push(cg.bias);
                    grads.push(cg.weights);
                    match cg.input {
                        Some(gi) => g = gi,
                        None => {
                            g.clear();
                        }
                    }
                }
                (Layer::Pool(_), LayerCache::Pool(pc)) => {
                    if !g.is_empty() {
                        g = maxpool2d_backward(pc, &g)?;
                    }
                }
                (Layer::Relu, LayerCache::Relu(out)) => {
                    if !g.is_empty() {
                        g = relu_backward(out, &g)?;
                    }
                }
                (Layer::SoftmaxGrid, LayerCache::Identity) => {}
                _ => return Err(Error::config("forward cache does not match layer sequence")),
            }
        }
        grads.reverse();
        let input_grad = if need_input_grad { Some(g) } else { None };
        Ok((grads, input_grad))
    }

    /// Named parameters in a stable order: `layer{i}.weight`, `layer{i}.bias`.
    pub fn params(&self) -> Vec<(String, &Tensor)> {
        let mut out = Vec::new();
        for (i, l) in self.layers.iter().enumerate() {
            if let Layer::Conv { weights, bias, .. } = l {
                out.push((format!("layer{i}.weight"), weights));
                out.push((format!("layer{i}.bias"), bias));
            }
        }
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = Vec::new();
        for l in &mut self.layers {
            if let Layer::Conv { weights, bias, .. } = l {
                out.push(weights);
                out.push(bias);
            }
        }
        out
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|(_, t)| t.len()).sum()
    }

    /// Replaces a parameter's values, keeping its shape.
    pub fn set_param(&mut self, name: &str, shape: &[usize], values: Vec<f32>) -> Result<()> {
        let names: Vec<String> = self.params().into_iter().map(|(n, _)| n).collect();
        let idx = names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::config(format!("unknown parameter {name:?}")))?;
        let p = &mut self.params_mut()[idx];
        if p.shape() != shape {
            return Err(Error::config(format!(
                "parameter {name}: shape {shape:?} does not match network {:?}",
                p.shape()
            )));
        }
        p.data_mut().copy_from_slice(&values);
        Ok(())
    }

    fn check_input(&self, input: &Tensor) -> Result<()> {
        let (c, _, _) = input.chw()?;
        if c != self.in_channels {
            return Err(Error::config(format!(
                "network expects {} input channels, got {c}",
                self.in_channels
            )));
        }
        Ok(())
    }
}
