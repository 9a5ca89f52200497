use crate::error::{Error, Result};
use crate::nn::tensor::Tensor;

/// Scalar loss together with its gradient with respect to the prediction.
#[derive(Debug, Clone)]
pub struct LossValue {
    pub loss: f64,
    pub grad: Tensor,
}

/// Numerically stable softmax (max subtraction, 64-bit accumulation).
pub fn softmax(logits: &[f32]) -> Vec<f64> {
    let max = logits.iter().fold(f32::NEG_INFINITY, |m, &v| m.max(v)) as f64;
    let exps: Vec<f64> = logits.iter().map(|&v| (v as f64 - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / z).collect()
}

/// `-log softmax(logits)[target]` and its gradient `softmax - onehot`, written into `grad`.
pub fn softmax_cross_entropy_into(logits: &[f32], target: usize, grad: &mut [f32]) -> Result<f64> {
    let k = logits.len();
    if k < 2 {
        return Err(Error::config("softmax cross-entropy needs at least two classes"));
    }
    if target >= k {
        return Err(Error::config(format!(
            "target class {target} out of range for {k} logits"
        )));
    }
    let max = logits.iter().fold(f32::NEG_INFINITY, |m, &v| m.max(v)) as f64;
    let mut z = 0.0f64;
    for &v in logits {
        z += (v as f64 - max).exp();
    }
    let log_z = z.ln() + max;
    for (g, &v) in grad.iter_mut().zip(logits) {
        *g = (v as f64 - log_z).exp() as f32;
    }
    grad[target] -= 1.0;
    let loss = log_z - logits[target] as f64;
    if !loss.is_finite() {
        return Err(Error::numeric("softmax cross-entropy is not finite"));
    }
    Ok(loss)
}

pub fn softmax_cross_entropy(logits: &Tensor, target: usize) -> Result<LossValue> {
    let mut grad = vec![0.0f32; logits.len()];
    let loss = softmax_cross_entropy_into(logits.data(), target, &mut grad)?;
    Ok(LossValue {
        loss,
        grad: Tensor::new(logits.shape().to_vec(), grad)?,
    })
}

fn check_masked(pred: &Tensor, target: &Tensor, mask: &Tensor) -> Result<usize> {
    if pred.shape() != target.shape() || pred.shape() != mask.shape() {
        return Err(Error::config(format!(
            "loss operands differ in shape: {:?}, {:?}, {:?}",
            pred.shape(),
            target.shape(),
            mask.shape()
        )));
    }
    Ok(mask.data().iter().filter(|&&m| m != 0.0).count())
}

/// Mean absolute error over elements where `mask != 0`; an empty mask gives zero.
/// The subgradient at zero difference is zero.
pub fn l1_loss(pred: &Tensor, target: &Tensor, mask: &Tensor) -> Result<LossValue> {
    let count = check_masked(pred, target, mask)?;
    let mut grad = vec![0.0f32; pred.len()];
    if count == 0 {
        return Ok(LossValue {
            loss: 0.0,
            grad: Tensor::new(pred.shape().to_vec(), grad)?,
        });
    }
    let inv = 1.0 / count as f64;
    let mut sum = 0.0f64;
    for (i, ((&p, &t), &m)) in pred.data().iter().zip(target.data()).zip(mask.data()).enumerate() {
        if m == 0.0 {
            continue;
        }
        let d = p as f64 - t as f64;
        sum += d.abs();
        grad[i] = if d > 0.0 {
            inv as f32
        } else if d < 0.0 {
            -inv as f32
        } else {
            0.0
        };
    }
    Ok(LossValue {
        loss: sum * inv,
        grad: Tensor::new(pred.shape().to_vec(), grad)?,
    })
}

/// Mean squared error over masked elements. Kept as the baseline regression loss.
pub fn l2_loss(pred: &Tensor, target: &Tensor, mask: &Tensor) -> Result<LossValue> {
    let count = check_masked(pred, target, mask)?;
    let mut grad = vec![0.0f32; pred.len()];
    if count == 0 {
        return Ok(LossValue {
            loss: 0.0,
            grad: Tensor::new(pred.shape().to_vec(), grad)?,
        });
    }
    let inv = 1.0 / count as f64;
    let mut sum = 0.0f64;
    for (i, ((&p, &t), &m)) in pred.data().iter().zip(target.data()).zip(mask.data()).enumerate() {
        if m == 0.0 {
            continue;
        }
        let d = p as f64 - t as f64;
        sum += d * d;
        grad[i] = (2.0 * d * inv) as f32;
    }
    Ok(LossValue {
        loss: sum * inv,
        grad: Tensor::new(pred.shape().to_vec(), grad)?,
    })
}
