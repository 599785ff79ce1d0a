//! Learned keypoint-space dynamics: residual MLP model and its trainer.

mod model;
mod train;

pub use model::{DynModel, NormStats};
pub use train::{smooth, train_dynamics, DynTrainConfig, DynTrainReport};
