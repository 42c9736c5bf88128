//! L-BFGS optimization and the training loop.

mod lbfgs;
mod trainer;

pub use lbfgs::{Lbfgs, LbfgsConfig, StepOutcome};
pub use trainer::{loss_and_grad, train, EpochRecord, TrainConfig, TrainHistory, TrainResult};
