//! Planar two-link arm environment: simulation, keypoint camera, scripted
//! expert, and data collection.

mod analytic;
mod camera;
mod collect;
mod expert;
mod sim;

pub use analytic::AnalyticLatentModel;
pub use camera::{
    observe_keypoints, observe_latent, world_layout, Camera, KP_CUBE, KP_EE, KP_ELBOW, KP_TARGET,
    NUM_KEYPOINTS,
};
pub use collect::{
    collect_demos, collect_dyn_data, run_expert_episode, sample_scenario, DemoBatch, DynBatch,
    ExpertEpisode, Scenario, DEMO_RECORD_HZ, MAX_EPISODE_STEPS, SPAWN_R_MAX, SPAWN_R_MIN, START_Q,
};
pub use expert::{expert_done, ik_velocity, joint_step_toward, scripted_expert};
pub use sim::{
    angle_diff, dist, ee_pos, elbow_pos, jacobian, placed, step_env, step_env_dt, wrap_angle,
    WorldState, ACTION_DIM, CONTROL_DT, DOF, GRASP_RADIUS, LINK_1, LINK_2, SUCCESS_RADIUS,
    VEL_LIMIT,
};
