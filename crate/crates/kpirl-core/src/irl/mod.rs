//! Cost learning from keypoint demonstrations.
//!
//! The outer loop descends the imitation loss between a demo and the
//! trajectory the inner planner produces, differentiating straight
//! through the inner gradient updates.

mod checkpoint;
mod cost;
mod loss;
mod train;

pub use checkpoint::{load_cost, load_irl_state, save_cost, save_irl_state, CostSpec};
pub use cost::{CostNodes, CostParams, CostVariant, LearnedCost};
pub use loss::{irl_loss, irl_loss_rec, make_relative};
pub use train::{
    feature_matching_baseline, outer_grad, shared_horizon, train_irl, train_irl_steps,
    IrlState, IrlTrainConfig, OuterGrad,
};
