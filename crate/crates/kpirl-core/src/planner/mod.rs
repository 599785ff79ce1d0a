//! Action-sequence optimization over a latent dynamics model.
//!
//! Two planners share one interface: gradient descent through a recorded
//! rollout ([`plan_gradient`]) and cross-entropy sampling ([`plan_cem`]).
//! [`mpc_execute`] wraps either in a receding-horizon loop against the
//! simulator.

mod cem;
mod gradient;
mod mpc;
mod traits;

pub use cem::{plan_cem, CemReport};
pub use gradient::{plan_gradient, plan_gradient_rec, rollout_rec};
pub use mpc::{
    mpc_execute, shift_actions, CemPlanner, GradientPlanner, MpcConfig, MpcRun, MpcStepLog,
    PlanOutcome, Planner,
};
pub use traits::{DiffLatentDynamics, LatentDynamics, PlannerConfig, TrajectoryCost};
