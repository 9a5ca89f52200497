use crate::error::{Error, Result};
use crate::nn::tensor::Tensor;

pub fn relu_forward(x: &Tensor) -> Tensor {
    let mut y = x.clone();
    y.disable_grad();
    for v in y.data_mut() {
        *v = v.max(0.0);
    }
    y
}

/// Gradient passes where the forward output was positive.
pub fn relu_backward(output: &Tensor, grad_out: &[f32]) -> Result<Vec<f32>> {
    if grad_out.len() != output.len() {
        return Err(Error::config("relu backward: gradient length mismatch"));
    }
    Ok(output
        .data()
        .iter()
        .zip(grad_out)
        .map(|(&y, &g)| if y > 0.0 { g } else { 0.0 })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clamps_and_masks() {
        let x = Tensor::new(vec![4], vec![-1.0, 0.0, 2.0, -0.5]).unwrap();
        let y = relu_forward(&x);
        assert_eq!(y.data(), &[0.0, 0.0, 2.0, 0.0]);
        assert_eq!(relu_backward(&y, &[1.0; 4]).unwrap(), vec![0.0, 0.0, 1.0, 0.0]);
    }
}
