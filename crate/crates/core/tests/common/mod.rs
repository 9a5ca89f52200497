//! Independent oracles shared by the integration and acceptance tests:
//! direct-loop f64 reference implementations and central differences.

#![allow(dead_code)]

use hpk_core::nn::activation::{relu_backward, relu_forward};
use hpk_core::nn::conv::{conv2d_backward, conv2d_forward};
use hpk_core::nn::gradcheck::relative_error;
use hpk_core::nn::loss::{l1_loss, l2_loss, softmax_cross_entropy};
use hpk_core::nn::pool::{maxpool2d_backward, maxpool2d_forward};
use hpk_core::nn::{LayerSpec, Padding, Tensor};
use rand::Rng;

pub const FD_EPS: f64 = 1e-5;

/// Central difference of `f` with respect to every coordinate of `x`.
pub fn numeric_grad(x: &[f64], eps: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut p = x.to_vec();
    (0..x.len())
        .map(|i| {
            let v = p[i];
            p[i] = v + eps;
            let a = f(&p);
            p[i] = v - eps;
            let b = f(&p);
            p[i] = v;
            (a - b) / (2.0 * eps)
        })
        .collect()
}

pub fn max_rel(analytic: &[f32], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &n)| relative_error(a as f64, n))
        .fold(0.0, f64::max)
}

/// Direct six-loop convolution with the same padding resolution as the layer.
pub fn conv_reference(
    x: &[f64],
    (c, h, w): (usize, usize, usize),
    wt: &[f64],
    b: &[f64],
    spec: &LayerSpec,
) -> (Vec<f64>, usize, usize) {
    let (k, s, oc) = (spec.kernel, spec.stride, spec.out_channels);
    let (ry, rx) = (spec.resolve(h).unwrap(), spec.resolve(w).unwrap());
    let (oh, ow) = (ry.output, rx.output);
    let mut out = vec![0.0; oc * oh * ow];
    for o in 0..oc {
        for oy in 0..oh {
            for ox in 0..ow {
                let mut acc = b[o];
                for ci in 0..c {
                    for ky in 0..k {
                        for kx in 0..k {
                            let y = (oy * s + ky) as isize - ry.pad_before as isize;
                            let xx = (ox * s + kx) as isize - rx.pad_before as isize;
                            if y < 0 || xx < 0 || y >= h as isize || xx >= w as isize {
                                continue;
                            }
                            acc += wt[((o * c + ci) * k + ky) * k + kx] * x[(ci * h + y as usize) * w + xx as usize];
                        }
                    }
                }
                out[(o * oh + oy) * ow + ox] = acc;
            }
        }
    }
    (out, oh, ow)
}

/// Direct max pooling; padded positions never win.
pub fn pool_reference(x: &[f64], (c, h, w): (usize, usize, usize), spec: &LayerSpec) -> Vec<f64> {
    let (k, s) = (spec.kernel, spec.stride);
    let (ry, rx) = (spec.resolve(h).unwrap(), spec.resolve(w).unwrap());
    let mut out = Vec::new();
    for ci in 0..c {
        for oy in 0..ry.output {
            for ox in 0..rx.output {
                let mut m = f64::NEG_INFINITY;
                for ky in 0..k {
                    for kx in 0..k {
                        let y = (oy * s + ky) as isize - ry.pad_before as isize;
                        let xx = (ox * s + kx) as isize - rx.pad_before as isize;
                        if y >= 0 && xx >= 0 && y < h as isize && xx < w as isize {
                            m = m.max(x[(ci * h + y as usize) * w + xx as usize]);
                        }
                    }
                }
                out.push(m);
            }
        }
    }
    out
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn to64(v: &[f32]) -> Vec<f64> {
    v.iter().map(|&x| x as f64).collect()
}

fn uniform<R: Rng>(rng: &mut R, n: usize, lo: f32, hi: f32) -> Vec<f32> {
    (0..n).map(|_| rng.gen_range(lo..hi)).collect()
}

/// Operation, shape description and maximum relative error.
pub type OpCheck = (&'static str, String, f64);

/// Input, weight and bias gradients of a conv layer against the reference.
pub fn check_conv<R: Rng>(rng: &mut R, c: usize, h: usize, w: usize, spec: LayerSpec) -> OpCheck {
    let k = spec.kernel;
    let oc = spec.out_channels;
    let x = Tensor::new(vec![c, h, w], uniform(rng, c * h * w, -1.0, 1.0)).unwrap();
    let wt = Tensor::new(vec![oc, c, k, k], uniform(rng, oc * c * k * k, -1.0, 1.0)).unwrap();
    let b = Tensor::new(vec![oc], uniform(rng, oc, -1.0, 1.0)).unwrap();
    let (y, cache) = conv2d_forward(&x, &wt, &b, &spec).unwrap();
    let r: Vec<f32> = uniform(rng, y.len(), -1.0, 1.0);
    let r64 = to64(&r);
    let g = conv2d_backward(&cache, &wt, &r, true).unwrap();
    let (x64, w64, b64) = (to64(x.data()), to64(wt.data()), to64(b.data()));
    let (ref_y, _, _) = conv_reference(&x64, (c, h, w), &w64, &b64, &spec);
    let fwd = max_rel(y.data(), &ref_y);
    let dx = numeric_grad(&x64, FD_EPS, |xp| dot(&conv_reference(xp, (c, h, w), &w64, &b64, &spec).0, &r64));
    let dw = numeric_grad(&w64, FD_EPS, |wp| dot(&conv_reference(&x64, (c, h, w), wp, &b64, &spec).0, &r64));
    let db = numeric_grad(&b64, FD_EPS, |bp| dot(&conv_reference(&x64, (c, h, w), &w64, bp, &spec).0, &r64));
    let err = fwd
        .max(max_rel(g.input.as_deref().unwrap(), &dx))
        .max(max_rel(&g.weights, &dw))
        .max(max_rel(&g.bias, &db));
    ("conv2d", format!("{c}x{h}x{w} k{k} s{} {:?} -> {oc}", spec.stride, spec.padding), err)
}

/// Max-pool input gradient. Inputs are a shuffled lattice with spacing
/// far above the difference step, so no window has a near tie.
pub fn check_pool<R: Rng>(rng: &mut R, c: usize, h: usize, w: usize, spec: LayerSpec) -> OpCheck {
    let n = c * h * w;
    let mut vals: Vec<f32> = (0..n).map(|i| i as f32 * 0.01 - 0.5).collect();
    for i in (1..n).rev() {
        vals.swap(i, rng.gen_range(0..=i));
    }
    let x = Tensor::new(vec![c, h, w], vals).unwrap();
    let (y, cache) = maxpool2d_forward(&x, &spec).unwrap();
    let r = uniform(rng, y.len(), -1.0, 1.0);
    let r64 = to64(&r);
    let g = maxpool2d_backward(&cache, &r).unwrap();
    let x64 = to64(x.data());
    let fwd = max_rel(y.data(), &pool_reference(&x64, (c, h, w), &spec));
    let dx = numeric_grad(&x64, FD_EPS, |xp| dot(&pool_reference(xp, (c, h, w), &spec), &r64));
    let err = fwd.max(max_rel(&g, &dx));
    ("maxpool2d", format!("{c}x{h}x{w} k{} s{} {:?}", spec.kernel, spec.stride, spec.padding), err)
}

/// ReLU with inputs kept at least 0.01 away from the kink.
pub fn check_relu<R: Rng>(rng: &mut R, n: usize) -> OpCheck {
    let vals: Vec<f32> = (0..n)
        .map(|_| {
            let v: f32 = rng.gen_range(0.01..1.0);
            if rng.gen_bool(0.5) {
                v
            } else {
                -v
            }
        })
        .collect();
    let x = Tensor::new(vec![n], vals).unwrap();
    let y = relu_forward(&x);
    let r = uniform(rng, n, -1.0, 1.0);
    let r64 = to64(&r);
    let g = relu_backward(&y, &r).unwrap();
    let dx = numeric_grad(&to64(x.data()), FD_EPS, |xp| {
        xp.iter().zip(&r64).map(|(v, r)| v.max(0.0) * r).sum()
    });
    ("relu", format!("{n}"), max_rel(&g, &dx))
}

pub fn check_softmax_ce<R: Rng>(rng: &mut R, k: usize) -> OpCheck {
    let logits = Tensor::new(vec![k], uniform(rng, k, -3.0, 3.0)).unwrap();
    let target = rng.gen_range(0..k);
    let lv = softmax_cross_entropy(&logits, target).unwrap();
    let f = |z: &[f64]| {
        let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = z.iter().map(|v| (v - m).exp()).sum::<f64>().ln() + m;
        lse - z[target]
    };
    let l64 = to64(logits.data());
    let loss_err = relative_error(lv.loss, f(&l64));
    let dx = numeric_grad(&l64, FD_EPS, f);
    ("softmax_ce", format!("{k} classes"), loss_err.max(max_rel(lv.grad.data(), &dx)))
}

/// Masked L1 and L2 losses. L1 differences are kept above 1e-3 in magnitude.
pub fn check_regression<R: Rng>(rng: &mut R, n: usize, l1: bool) -> OpCheck {
    let target = uniform(rng, n, -1.0, 1.0);
    let pred: Vec<f32> = target
        .iter()
        .map(|t| {
            let d: f32 = rng.gen_range(1e-3..0.5);
            if rng.gen_bool(0.5) {
                t + d
            } else {
                t - d
            }
        })
        .collect();
    let mask: Vec<f32> = (0..n).map(|i| if i == 0 || rng.gen_bool(0.7) { 1.0 } else { 0.0 }).collect();
    let mk = |v: Vec<f32>| Tensor::new(vec![n], v).unwrap();
    let (p, t, m) = (mk(pred.clone()), mk(target.clone()), mk(mask.clone()));
    let lv = if l1 { l1_loss(&p, &t, &m) } else { l2_loss(&p, &t, &m) }.unwrap();
    let (t64, m64) = (to64(&target), to64(&mask));
    let count = m64.iter().filter(|&&v| v != 0.0).count() as f64;
    let f = |x: &[f64]| {
        x.iter()
            .zip(&t64)
            .zip(&m64)
            .filter(|(_, &m)| m != 0.0)
            .map(|((a, b), _)| if l1 { (a - b).abs() } else { (a - b).powi(2) })
            .sum::<f64>()
            / count
    };
    let p64 = to64(&pred);
    // the difference step must stay below the smallest |pred - target|
    let dx = numeric_grad(&p64, 1e-4, f);
    let err = relative_error(lv.loss, f(&p64)).max(max_rel(lv.grad.data(), &dx));
    (if l1 { "l1" } else { "l2" }, format!("{n}"), err)
}

/// Random conv shape: small channels, kernel 1..=4, stride 1..=2, mixed padding.
pub fn random_conv<R: Rng>(rng: &mut R) -> (usize, usize, usize, LayerSpec) {
    let k = rng.gen_range(1..=4);
    let s = rng.gen_range(1..=2);
    let pad = if rng.gen_bool(0.5) { Padding::Same } else { Padding::Pixels(rng.gen_range(0..k)) };
    let (c, h, w) = (rng.gen_range(1..=3), rng.gen_range(k..=9), rng.gen_range(k..=9));
    (c, h, w, LayerSpec::conv(k, s, pad, rng.gen_range(1..=4)))
}

pub fn random_pool<R: Rng>(rng: &mut R) -> (usize, usize, usize, LayerSpec) {
    let k = rng.gen_range(2..=3);
    let s = rng.gen_range(1..=k);
    let pad = if rng.gen_bool(0.5) { Padding::Same } else { Padding::Pixels(rng.gen_range(0..k)) };
    let (c, h, w) = (rng.gen_range(1..=3), rng.gen_range(k..=10), rng.gen_range(k..=10));
    (c, h, w, LayerSpec::maxpool(k, s, pad))
}

/// Every differentiable op on `shapes` random configurations each.
pub fn gradient_suite<R: Rng>(rng: &mut R, shapes: usize) -> Vec<OpCheck> {
    let mut out = Vec::new();
    for _ in 0..shapes {
        let (c, h, w, s) = random_conv(rng);
        out.push(check_conv(rng, c, h, w, s));
        let (c, h, w, s) = random_pool(rng);
        out.push(check_pool(rng, c, h, w, s));
        let n = rng.gen_range(5..60);
        out.push(check_relu(rng, n));
        let k = rng.gen_range(2..8);
        out.push(check_softmax_ce(rng, k));
        let n = rng.gen_range(3..40);
        out.push(check_regression(rng, n, true));
        out.push(check_regression(rng, n, false));
    }
    out
}

/// Textbook O(n²) DBSCAN over a precomputed distance function: core points
/// are expanded breadth-first; a border point takes the label of its nearest
/// core neighbor (lower index on ties).
pub fn brute_dbscan(n: usize, eps: f64, min_pts: usize, d: impl Fn(usize, usize) -> f64) -> Vec<Option<usize>> {
    let dm: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| d(i, j)).collect()).collect();
    let core: Vec<bool> = (0..n).map(|i| dm[i].iter().filter(|&&x| x <= eps).count() >= min_pts).collect();
    let mut label: Vec<Option<usize>> = vec![None; n];
    let mut next = 0;
    for i in 0..n {
        if !core[i] || label[i].is_some() {
            continue;
        }
        let mut queue = std::collections::VecDeque::from([i]);
        label[i] = Some(next);
        while let Some(p) = queue.pop_front() {
            for q in 0..n {
                if core[q] && label[q].is_none() && dm[p][q] <= eps {
                    label[q] = Some(next);
                    queue.push_back(q);
                }
            }
        }
        next += 1;
    }
    let core_label = label.clone();
    for i in (0..n).filter(|&i| !core[i]) {
        let mut best: Option<(f64, usize)> = None;
        for j in (0..n).filter(|&j| core[j] && dm[i][j] <= eps) {
            if best.map_or(true, |(bd, _)| dm[i][j] < bd) {
                best = Some((dm[i][j], j));
            }
        }
        label[i] = best.and_then(|(_, j)| core_label[j]);
    }
    label
}

/// True when two labelings describe the same partition and the same noise set.
pub fn same_partition(a: &[Option<usize>], b: &[Option<usize>]) -> bool {
    if a.len() != b.len() {
        return false;
    }
    let mut fwd = std::collections::HashMap::new();
    let mut back = std::collections::HashMap::new();
    for (x, y) in a.iter().zip(b) {
        match (x, y) {
            (None, None) => {}
            (Some(x), Some(y)) => {
                if *fwd.entry(*x).or_insert(*y) != *y || *back.entry(*y).or_insert(*x) != *x {
                    return false;
                }
            }
            _ => return false,
        }
    }
    true
}

/// Runs synth, autolabel, train, infer and eval into `out` and returns the
/// bytes of every artifact that must be reproducible.
pub fn run_pipeline(cfg: &hpk_core::pipeline::RunConfig, out: &std::path::Path) -> Vec<(&'static str, Vec<u8>)> {
    use hpk_core::pipeline as p;
    let layout = p::Layout::new(cfg, out, Some(out));
    p::cmd_synth(cfg, &layout).unwrap();
    p::cmd_autolabel(cfg, &layout).unwrap();
    p::cmd_train(cfg, &layout).unwrap();
    p::cmd_infer(cfg, &layout).unwrap();
    p::cmd_eval(cfg, &layout).unwrap();
    [p::MANIFEST, p::BOUNDARIES, p::CHECKPOINT, p::TRAIN_LOG, p::DETECTIONS, p::REPORT_JSON, p::REPORT_CSV]
        .into_iter()
        .map(|name| (name, std::fs::read(out.join(name)).unwrap()))
        .collect()
}

pub fn tiny_config() -> hpk_core::pipeline::RunConfig {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/tiny.json");
    hpk_core::pipeline::RunConfig::load(&path).unwrap()
}
