//! Learning task costs from keypoint demonstrations.
//!
//! The pipeline: a planar two-link arm simulator emits keypoint
//! observations, a residual MLP learns keypoint-space dynamics from
//! interaction data, gradient and cross-entropy planners optimize action
//! sequences against a cost over predicted keypoint trajectories, and the
//! cost itself is learned by differentiating through the planner's own
//! gradient step. An adversarial variant learns a reward and value function
//! instead of a fixed-form cost.

pub mod airl;
pub mod autodiff;
pub mod dynamics;
pub mod error;
pub mod irl;
pub mod mlp;
pub mod planner;
pub mod types;
pub mod weights;
pub mod world;

pub use error::{Error, Result};
