use rand::seq::index::sample;
use rand::Rng;

use crate::error::Result;
use crate::nn::network::Network;
use crate::nn::tensor::Tensor;

/// Relative error with a small absolute floor in the denominator, so that
/// components whose true gradient is ~0 are compared on an absolute scale.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs()).max(1e-2);
    (analytic - numeric).abs() / scale
}

#[derive(Debug, Clone, Copy)]
pub struct GradCheck {
    pub max_rel_error: f64,
    pub checked: usize,
}

/// Compares analytic parameter gradients against central differences of the
/// scalar `sum(r · net(input))` for a fixed random projection `r`.
///
/// Checks `samples` randomly chosen parameters (all of them when fewer exist).
pub fn grad_check<R: Rng>(
    net: &Network,
    input: &Tensor,
    eps: f32,
    samples: usize,
    rng: &mut R,
) -> Result<GradCheck> {
    let (out, cache) = net.forward_train(input)?;
    let proj: Vec<f32> = (0..out.len()).map(|_| rng.gen_range(-1.0f32..1.0)).collect();
    let grads = net.backward(&cache, &proj)?;

    let objective = |n: &Network| -> Result<f64> {
        let y = n.forward(input)?;
        Ok(y.data().iter().zip(&proj).map(|(&a, &b)| a as f64 * b as f64).sum())
    };

    let sizes: Vec<usize> = net.params().iter().map(|(_, t)| t.len()).collect();
    let total: usize = sizes.iter().sum();
    let picks = sample(rng, total, samples.min(total)).into_vec();

    let mut probe = net.clone();
    let mut max_err = 0.0f64;
    for flat in &picks {
        let (mut p, mut off) = (0, *flat);
        while off >= sizes[p] {
            off -= sizes[p];
            p += 1;
        }
        let original = probe.params_mut()[p].data()[off];
        let plus = original + eps;
        let minus = original - eps;
        probe.params_mut()[p].data_mut()[off] = plus;
        let lp = objective(&probe)?;
        probe.params_mut()[p].data_mut()[off] = minus;
        let lm = objective(&probe)?;
        probe.params_mut()[p].data_mut()[off] = original;
        let numeric = (lp - lm) / (plus as f64 - minus as f64);
        max_err = max_err.max(relative_error(grads[p][off] as f64, numeric));
    }
    Ok(GradCheck {
        max_rel_error: max_err,
        checked: picks.len(),
    })
}
