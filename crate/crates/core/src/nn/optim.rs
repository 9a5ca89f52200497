use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::tensor::Tensor;

/// How the momentum coefficient evolves with the step count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MomentumSchedule {
    Constant { momentum: f64 },
    /// `mu_t = min(mu_max, 1 - 1 / (floor(t / period) + 2))`.
    Ramp { mu_max: f64, period: u64 },
}

impl Default for MomentumSchedule {
    fn default() -> Self {
        MomentumSchedule::Ramp {
            mu_max: 0.95,
            period: 250,
        }
    }
}

impl MomentumSchedule {
    pub fn momentum_at(&self, step: u64) -> f64 {
        match *self {
            MomentumSchedule::Constant { momentum } => momentum,
            MomentumSchedule::Ramp { mu_max, period } => {
                let ramp = 1.0 - 1.0 / ((step / period.max(1)) as f64 + 2.0);
                ramp.min(mu_max)
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mu = match *self {
            MomentumSchedule::Constant { momentum } => momentum,
            MomentumSchedule::Ramp { mu_max, .. } => mu_max,
        };
        if !(0.0..1.0).contains(&mu) {
            return Err(Error::config(format!("momentum {mu} outside [0, 1)")));
        }
        Ok(())
    }
}

/// Step decay of the learning rate by epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LrSchedule {
    pub base: f64,
    #[serde(default = "default_decay")]
    pub decay: f64,
    #[serde(default = "default_every")]
    pub every_epochs: u64,
}

fn default_decay() -> f64 {
    0.5
}

fn default_every() -> u64 {
    5
}

impl LrSchedule {
    pub fn at_epoch(&self, epoch: u64) -> f64 {
        self.base * self.decay.powi((epoch / self.every_epochs.max(1)) as i32)
    }
}

/// Optimizer state: one velocity buffer per parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimState {
    pub learning_rate: f64,
    pub momentum: f64,
    pub schedule: MomentumSchedule,
    pub velocity: Vec<Vec<f32>>,
    pub step_count: u64,
}

impl OptimState {
    /// Zero velocity shaped like `params`.
    pub fn new(params: &[&Tensor], learning_rate: f64, schedule: MomentumSchedule) -> Self {
        Self {
            learning_rate,
            momentum: schedule.momentum_at(0),
            schedule,
            velocity: params.iter().map(|p| vec![0.0; p.len()]).collect(),
            step_count: 0,
        }
    }
}

/// `v <- mu*v - lr*g; p <- p + v` for every parameter, using each tensor's gradient buffer.
pub fn sgd_momentum_step(params: &mut [&mut Tensor], state: &mut OptimState) -> Result<()> {
    if params.len() != state.velocity.len() {
        return Err(Error::config(format!(
            "optimizer has {} velocity buffers for {} parameters",
            state.velocity.len(),
            params.len()
        )));
    }
    let mu = state.schedule.momentum_at(state.step_count);
    let lr = state.learning_rate;
    for (i, (p, v)) in params.iter_mut().zip(state.velocity.iter_mut()).enumerate() {
        if v.len() != p.len() {
            return Err(Error::config(format!(
                "velocity {i} has {} values, parameter has {}",
                v.len(),
                p.len()
            )));
        }
        let grad = p
            .grad()
            .ok_or_else(|| Error::config(format!("parameter {i} has no gradient buffer")))?
            .to_vec();
        for ((x, v), g) in p.data_mut().iter_mut().zip(v.iter_mut()).zip(&grad) {
            let nv = mu * *v as f64 - lr * *g as f64;
            *v = nv as f32;
            *x = (*x as f64 + nv) as f32;
        }
        p.check_finite(&format!("parameter {i} after SGD step"))?;
    }
    state.momentum = mu;
    state.step_count += 1;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn param(v: f32, g: f32) -> Tensor {
        let mut t = Tensor::new(vec![1], vec![v]).unwrap();
        t.accumulate_grad(&[g]).unwrap();
        t
    }

    #[test]
    fn plain_sgd() {
        let mut p = param(1.0, 1.0);
        let mut st = OptimState::new(&[&p], 0.1, MomentumSchedule::Constant { momentum: 0.0 });
        sgd_momentum_step(&mut [&mut p], &mut st).unwrap();
        assert_relative_eq!(p.data()[0], 0.9, epsilon = 1e-7);
        assert_eq!(st.step_count, 1);
    }

    #[test]
    fn momentum_two_steps() {
        let mut p = param(0.0, 1.0);
        let mut st = OptimState::new(&[&p], 0.1, MomentumSchedule::Constant { momentum: 0.9 });
        sgd_momentum_step(&mut [&mut p], &mut st).unwrap();
        let first = p.data()[0];
        sgd_momentum_step(&mut [&mut p], &mut st).unwrap();
        let second_delta = p.data()[0] - first;
        assert_relative_eq!(second_delta as f64, -0.1 * 1.0 * 1.9, epsilon = 1e-6);
    }

    #[test]
    fn zero_gradient_no_motion() {
        let mut p = param(2.5, 0.0);
        let mut st = OptimState::new(&[&p], 0.1, MomentumSchedule::default());
        for _ in 0..3 {
            sgd_momentum_step(&mut [&mut p], &mut st).unwrap();
        }
        assert_eq!(p.data()[0], 2.5);
    }

    #[test]
    fn non_finite_aborts() {
        let mut p = param(f32::MAX, -f32::MAX);
        let mut st = OptimState::new(&[&p], 1e10, MomentumSchedule::Constant { momentum: 0.0 });
        assert!(sgd_momentum_step(&mut [&mut p], &mut st).unwrap_err().is_numeric());
    }

    #[test]
    fn ramp_schedule() {
        let s = MomentumSchedule::default();
        assert_relative_eq!(s.momentum_at(0), 0.5);
        assert_relative_eq!(s.momentum_at(249), 0.5);
        assert_relative_eq!(s.momentum_at(250), 2.0 / 3.0);
        assert_relative_eq!(s.momentum_at(1_000_000), 0.95);
        let lr = LrSchedule { base: 0.1, decay: 0.5, every_epochs: 5 };
        assert_relative_eq!(lr.at_epoch(4), 0.1);
        assert_relative_eq!(lr.at_epoch(5), 0.05);
        assert_relative_eq!(lr.at_epoch(12), 0.025);
    }
}
