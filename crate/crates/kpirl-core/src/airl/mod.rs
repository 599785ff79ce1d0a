//! Adversarial imitation without keypoint labels.
//!
//! A discriminator separates expert state-action pairs from the policy's,
//! its logit doubles as the reward, a value function tracks long-run
//! reward by temporal differences, and the policy improves by planning
//! against reward plus terminal value.

mod checkpoint;
mod nets;
mod train;

pub use checkpoint::{load_airl, save_airl};
pub use nets::{Discriminator, PolicyNet, ValueFn, LOGIT_LIMIT};
pub use train::{
    airl_train, discriminator_update, plan_episodes, policy_update_tdmpc, value_td_update,
    AirlConfig, AirlRun, PlannedEpisode, IMITATION_WEIGHT,
};
