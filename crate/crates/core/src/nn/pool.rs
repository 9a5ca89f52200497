use crate::error::{Error, Result};
use crate::nn::layer::{LayerKind, LayerSpec};
use crate::nn::tensor::Tensor;

/// Argmax positions recorded by the forward pass.
#[derive(Debug, Clone)]
pub struct PoolCache {
    input_len: usize,
    argmax: Vec<usize>,
}

pub fn maxpool2d(input: &Tensor, spec: &LayerSpec) -> Result<Tensor> {
    maxpool2d_forward(input, spec).map(|(t, _)| t)
}

/// Max over each window; padded positions never win. Ties go to the lowest
/// linear input index.
pub fn maxpool2d_forward(input: &Tensor, spec: &LayerSpec) -> Result<(Tensor, PoolCache)> {
    if spec.kind != LayerKind::Maxpool {
        return Err(Error::config("maxpool2d called with a non-pool layer spec"));
    }
    spec.validate()?;
    let (c, h, w) = input.chw()?;
    let rows = spec.resolve(h)?;
    let cols = spec.resolve(w)?;
    let (oh, ow, k, s) = (rows.output, cols.output, spec.kernel, spec.stride);
    let data = input.data();
    let mut out = Vec::with_capacity(c * oh * ow);
    let mut argmax = Vec::with_capacity(c * oh * ow);
    for ch in 0..c {
        let base = ch * h * w;
        for oy in 0..oh {
            let y0 = (oy * s) as isize - rows.pad_before as isize;
            for ox in 0..ow {
                let x0 = (ox * s) as isize - cols.pad_before as isize;
                let mut best = f32::NEG_INFINITY;
                let mut best_idx = usize::MAX;
                for y in y0.max(0)..(y0 + k as isize).min(h as isize) {
                    for x in x0.max(0)..(x0 + k as isize).min(w as isize) {
                        let idx = base + y as usize * w + x as usize;
                        if best_idx == usize::MAX || data[idx] > best {
                            best = data[idx];
                            best_idx = idx;
                        }
                    }
                }
                debug_assert!(best_idx != usize::MAX, "pool window fully in padding");
                out.push(best);
                argmax.push(best_idx);
            }
        }
    }
    let t = Tensor::new(vec![c, oh, ow], out)?;
    t.check_finite("maxpool2d output")?;
    Ok((
        t,
        PoolCache {
            input_len: data.len(),
            argmax,
        },
    ))
}

pub fn maxpool2d_backward(cache: &PoolCache, grad_out: &[f32]) -> Result<Vec<f32>> {
    if grad_out.len() != cache.argmax.len() {
        return Err(Error::config("maxpool2d backward: gradient length mismatch"));
    }
    let mut gi = vec![0.0f32; cache.input_len];
    for (&idx, &g) in cache.argmax.iter().zip(grad_out) {
        gi[idx] += g;
    }
    Ok(gi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::layer::Padding;

    #[test]
    fn two_by_two() {
        let t = Tensor::new(vec![1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let out = maxpool2d(&t, &LayerSpec::maxpool(2, 2, Padding::Pixels(0))).unwrap();
        assert_eq!(out.shape(), &[1, 1, 1]);
        assert_eq!(out.data(), &[4.0]);
    }

    #[test]
    fn constant_in_constant_out() {
        let t = Tensor::filled(&[2, 7, 5], 0.25);
        let out = maxpool2d(&t, &LayerSpec::maxpool(3, 2, Padding::Same)).unwrap();
        assert_eq!(out.shape(), &[2, 4, 3]);
        assert!(out.data().iter().all(|&v| v == 0.25));
    }

    #[test]
    fn ties_route_to_lowest_index() {
        let t = Tensor::filled(&[1, 2, 2], 1.0);
        let (_, cache) = maxpool2d_forward(&t, &LayerSpec::maxpool(2, 2, Padding::Pixels(0))).unwrap();
        let g = maxpool2d_backward(&cache, &[1.0]).unwrap();
        assert_eq!(g, vec![1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn padding_never_wins_over_negative_values() {
        let t = Tensor::filled(&[1, 3, 3], -5.0);
        let out = maxpool2d(&t, &LayerSpec::maxpool(3, 1, Padding::Pixels(1))).unwrap();
        assert!(out.data().iter().all(|&v| v == -5.0));
    }
}
