//! Minimal differentiable tensor library: conv, max-pool, ReLU, losses and
//! SGD with a momentum schedule, enough to train the detector at toy scale.

pub mod activation;
pub mod checkpoint;
pub mod conv;
pub mod gradcheck;
pub mod layer;
pub mod loss;
pub mod network;
pub mod optim;
pub mod pool;
pub mod tensor;

pub use layer::{LayerKind, LayerSpec, Padding};
pub use network::{ForwardCache, Network};
pub use optim::{sgd_momentum_step, LrSchedule, MomentumSchedule, OptimState};
pub use tensor::Tensor;
