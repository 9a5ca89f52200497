//! 2-D cross-correlation over `C×H×W` tensors via im2col and a 64-bit GEMM.
//!
//! Storage stays `f32`; the column buffer and all products are `f64`, so sums
//! over long reductions do not lose precision.

use crate::error::{Error, Result};
use crate::nn::layer::{LayerKind, LayerSpec, Resolved};
use crate::nn::tensor::{check_finite, Tensor};

/// Row-major `c = alpha·op(a)·op(b) + beta·c` where `op` optionally transposes.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    a_t: bool,
    b: &[f64],
    b_t: bool,
    beta: f64,
    c: &mut [f64],
) {
    assert_eq!(a.len(), m * k);
    assert_eq!(b.len(), k * n);
    assert_eq!(c.len(), m * n);
    let (rsa, csa) = if a_t { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if b_t { (1, k as isize) } else { (n as isize, 1) };
    // SAFETY: the asserts above pin every buffer to the extents implied by
    // (m, k, n) and the strides describe those same row-major layouts.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Resolved geometry of one conv application.
#[derive(Debug, Clone, Copy)]
pub struct ConvGeometry {
    pub in_c: usize,
    pub in_h: usize,
    pub in_w: usize,
    pub out_c: usize,
    pub kernel: usize,
    pub stride: usize,
    pub rows: Resolved,
    pub cols: Resolved,
}

impl ConvGeometry {
    pub fn new(input: &Tensor, weights: &Tensor, bias: &Tensor, spec: &LayerSpec) -> Result<Self> {
        if spec.kind != LayerKind::Conv {
            return Err(Error::config("conv2d called with a non-conv layer spec"));
        }
        spec.validate()?;
        let (in_c, in_h, in_w) = input.chw()?;
        let k = spec.kernel;
        if weights.shape() != [spec.out_channels, in_c, k, k] {
            return Err(Error::config(format!(
                "conv weights have shape {:?}, expected {:?}",
                weights.shape(),
                [spec.out_channels, in_c, k, k]
            )));
        }
        if bias.shape() != [spec.out_channels] {
            return Err(Error::config(format!(
                "conv bias has shape {:?}, expected [{}]",
                bias.shape(),
                spec.out_channels
            )));
        }
        Ok(Self {
            in_c,
            in_h,
            in_w,
            out_c: spec.out_channels,
            kernel: k,
            stride: spec.stride,
            rows: spec.resolve(in_h)?,
            cols: spec.resolve(in_w)?,
        })
    }

    pub fn out_h(&self) -> usize {
        self.rows.output
    }

    pub fn out_w(&self) -> usize {
        self.cols.output
    }

    fn patch_len(&self) -> usize {
        self.in_c * self.kernel * self.kernel
    }

    fn positions(&self) -> usize {
        self.out_h() * self.out_w()
    }
}

/// Unrolls input patches into a `(C·k·k) × (H'·W')` matrix; padding reads as zero.
pub fn im2col(input: &[f32], g: &ConvGeometry) -> Vec<f64> {
    let (k, s) = (g.kernel, g.stride);
    let (oh, ow) = (g.out_h(), g.out_w());
    let n = g.positions();
    let mut col = vec![0.0f64; g.patch_len() * n];
    for c in 0..g.in_c {
        let plane = &input[c * g.in_h * g.in_w..(c + 1) * g.in_h * g.in_w];
        for ky in 0..k {
            for kx in 0..k {
                let row = (c * k + ky) * k + kx;
                let dst = &mut col[row * n..(row + 1) * n];
                for oy in 0..oh {
                    let iy = (oy * s + ky) as isize - g.rows.pad_before as isize;
                    if iy < 0 || iy >= g.in_h as isize {
                        continue;
                    }
                    let src = &plane[iy as usize * g.in_w..(iy as usize + 1) * g.in_w];
                    let out_row = &mut dst[oy * ow..(oy + 1) * ow];
                    for (ox, slot) in out_row.iter_mut().enumerate() {
                        let ix = (ox * s + kx) as isize - g.cols.pad_before as isize;
                        if ix >= 0 && (ix as usize) < g.in_w {
                            *slot = src[ix as usize] as f64;
                        }
                    }
                }
            }
        }
    }
    col
}

/// Scatters a column-matrix gradient back onto the input plane (adjoint of [`im2col`]).
fn col2im(col: &[f64], g: &ConvGeometry) -> Vec<f64> {
    let (k, s) = (g.kernel, g.stride);
    let (oh, ow) = (g.out_h(), g.out_w());
    let n = g.positions();
    let mut out = vec![0.0f64; g.in_c * g.in_h * g.in_w];
    for c in 0..g.in_c {
        let plane = &mut out[c * g.in_h * g.in_w..(c + 1) * g.in_h * g.in_w];
        for ky in 0..k {
            for kx in 0..k {
                let row = (c * k + ky) * k + kx;
                let src = &col[row * n..(row + 1) * n];
                for oy in 0..oh {
                    let iy = (oy * s + ky) as isize - g.rows.pad_before as isize;
                    if iy < 0 || iy >= g.in_h as isize {
                        continue;
                    }
                    let dst = &mut plane[iy as usize * g.in_w..(iy as usize + 1) * g.in_w];
                    for ox in 0..ow {
                        let ix = (ox * s + kx) as isize - g.cols.pad_before as isize;
                        if ix >= 0 && (ix as usize) < g.in_w {
                            dst[ix as usize] += src[oy * ow + ox];
                        }
                    }
                }
            }
        }
    }
    out
}

fn to_f64(v: &[f32]) -> Vec<f64> {
    v.iter().map(|&x| x as f64).collect()
}

fn to_f32(v: &[f64]) -> Vec<f32> {
    v.iter().map(|&x| x as f32).collect()
}

/// State kept from the forward pass for the backward pass.
#[derive(Debug, Clone)]
pub struct ConvCache {
    pub geometry: ConvGeometry,
    col: Vec<f64>,
}

pub fn conv2d(input: &Tensor, weights: &Tensor, bias: &Tensor, spec: &LayerSpec) -> Result<Tensor> {
    conv2d_forward(input, weights, bias, spec).map(|(t, _)| t)
}

pub fn conv2d_forward(
    input: &Tensor,
    weights: &Tensor,
    bias: &Tensor,
    spec: &LayerSpec,
) -> Result<(Tensor, ConvCache)> {
    let g = ConvGeometry::new(input, weights, bias, spec)?;
    let col = im2col(input.data(), &g);
    let n = g.positions();
    let mut out = vec![0.0f64; g.out_c * n];
    for (o, b) in bias.data().iter().enumerate() {
        out[o * n..(o + 1) * n].fill(*b as f64);
    }
    let w = to_f64(weights.data());
    gemm(g.out_c, g.patch_len(), n, &w, false, &col, false, 1.0, &mut out);
    let data = to_f32(&out);
    check_finite(&data, "conv2d output")?;
    let t = Tensor::new(vec![g.out_c, g.out_h(), g.out_w()], data)?;
    Ok((t, ConvCache { geometry: g, col }))
}

/// Gradients of a conv layer with respect to its input, weights and bias.
#[derive(Debug, Clone)]
pub struct ConvGrads {
    /// `None` when the caller asked to skip the input gradient (first layer).
    pub input: Option<Vec<f32>>,
    pub weights: Vec<f32>,
    pub bias: Vec<f32>,
}

pub fn conv2d_backward(
    cache: &ConvCache,
    weights: &Tensor,
    grad_out: &[f32],
    need_input_grad: bool,
) -> Result<ConvGrads> {
    let g = &cache.geometry;
    let n = g.positions();
    if grad_out.len() != g.out_c * n {
        return Err(Error::config(format!(
            "conv2d backward: gradient length {} does not match output {}×{}×{}",
            grad_out.len(),
            g.out_c,
            g.out_h(),
            g.out_w()
        )));
    }
    let go = to_f64(grad_out);
    let pl = g.patch_len();

    let mut gw = vec![0.0f64; g.out_c * pl];
    gemm(g.out_c, n, pl, &go, false, &cache.col, true, 0.0, &mut gw);
    let gb: Vec<f64> = go.chunks_exact(n).map(|r| r.iter().sum()).collect();

    let input = if need_input_grad {
        let w = to_f64(weights.data());
        let mut gcol = vec![0.0f64; pl * n];
        gemm(pl, g.out_c, n, &w, true, &go, false, 0.0, &mut gcol);
        let gi = to_f32(&col2im(&gcol, g));
        check_finite(&gi, "conv2d input gradient")?;
        Some(gi)
    } else {
        None
    };
    let weights = to_f32(&gw);
    let bias = to_f32(&gb);
    check_finite(&weights, "conv2d weight gradient")?;
    Ok(ConvGrads {
        input,
        weights,
        bias,
    })
}
