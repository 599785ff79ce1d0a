//! Two-link planar arm with a magnetic-gripper pick-and-place mechanic.
//!
//! Control is velocity-level: the action is `[dq_0, dq_1, g]` with joint
//! velocities clamped to [-1, 1] rad/s and `g > 0` closing the gripper.
//! A cube within reach of a closing gripper attaches to the end effector
//! and tracks it until the gripper opens.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const LINK_1: f64 = 1.0;
pub const LINK_2: f64 = 1.0;
/// Control-rate step, 5 Hz.
pub const CONTROL_DT: f64 = 0.2;
pub const VEL_LIMIT: f64 = 1.0;
/// A closing gripper captures the cube inside this end-effector radius.
pub const GRASP_RADIUS: f64 = 0.1;
/// The cube counts as placed within this distance of the target.
pub const SUCCESS_RADIUS: f64 = 0.05;

pub const DOF: usize = 2;
pub const ACTION_DIM: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub q: [f64; DOF],
    pub q_dot: [f64; DOF],
    pub gripper_closed: bool,
    pub cube_pos: [f64; 2],
    pub target_pos: [f64; 2],
    pub attached: bool,
    pub time_index: u32,
}

impl WorldState {
    pub fn new(q: [f64; DOF], cube_pos: [f64; 2], target_pos: [f64; 2]) -> Self {
        WorldState {
            q,
            q_dot: [0.0; DOF],
            gripper_closed: false,
            cube_pos,
            target_pos,
            attached: false,
            time_index: 0,
        }
    }
}

/// Wraps an angle into [-pi, pi). In-range angles pass through untouched
/// so that integrating a zero velocity is exactly the identity.
pub fn wrap_angle(a: f64) -> f64 {
    use std::f64::consts::PI;
    if (-PI..PI).contains(&a) {
        a
    } else {
        (a + PI).rem_euclid(2.0 * PI) - PI
    }
}

/// Shortest signed angular difference `a - b`.
pub fn angle_diff(a: f64, b: f64) -> f64 {
    wrap_angle(a - b)
}

pub fn elbow_pos(q: &[f64; DOF]) -> [f64; 2] {
    [LINK_1 * q[0].cos(), LINK_1 * q[0].sin()]
}

pub fn ee_pos(q: &[f64; DOF]) -> [f64; 2] {
    let e = elbow_pos(q);
    [
        e[0] + LINK_2 * (q[0] + q[1]).cos(),
        e[1] + LINK_2 * (q[0] + q[1]).sin(),
    ]
}

/// End-effector Jacobian, rows are (x, y), columns are joints.
pub fn jacobian(q: &[f64; DOF]) -> [[f64; DOF]; 2] {
    let (s1, c1) = q[0].sin_cos();
    let (s12, c12) = (q[0] + q[1]).sin_cos();
    [
        [-LINK_1 * s1 - LINK_2 * s12, -LINK_2 * s12],
        [LINK_1 * c1 + LINK_2 * c12, LINK_2 * c12],
    ]
}

pub fn dist(a: &[f64; 2], b: &[f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Advances the world by `dt` under action `[dq_0, dq_1, g]`.
///
/// Joint velocities are clamped before integration, angles wrap, and the
/// gripper state is recomputed from `g`. Attachment happens when a closing
/// gripper brings the (new) end effector within `GRASP_RADIUS` of the cube;
/// an attached cube rides the end effector until `g <= 0` releases it.
pub fn step_env_dt(state: &WorldState, action: &[f64], dt: f64) -> Result<WorldState> {
    if action.len() != ACTION_DIM {
        return Err(Error::shape(
            "step_env",
            format!("{ACTION_DIM} action entries"),
            action.len().to_string(),
        ));
    }
    if !action.iter().all(|a| a.is_finite()) {
        return Err(Error::non_finite("step_env action"));
    }
    let dq = [
        action[0].clamp(-VEL_LIMIT, VEL_LIMIT),
        action[1].clamp(-VEL_LIMIT, VEL_LIMIT),
    ];
    let mut next = state.clone();
    next.q = [
        wrap_angle(state.q[0] + dq[0] * dt),
        wrap_angle(state.q[1] + dq[1] * dt),
    ];
    next.q_dot = dq;
    next.gripper_closed = action[2] > 0.0;

    let ee = ee_pos(&next.q);
    if next.attached && !next.gripper_closed {
        next.attached = false;
    } else if !next.attached && next.gripper_closed && dist(&ee, &state.cube_pos) < GRASP_RADIUS {
        next.attached = true;
    }
    if next.attached {
        next.cube_pos = ee;
    }
    next.time_index = state.time_index.saturating_add(1);
    Ok(next)
}

/// Control-rate step, `CONTROL_DT` seconds.
pub fn step_env(state: &WorldState, action: &[f64]) -> Result<WorldState> {
    step_env_dt(state, action, CONTROL_DT)
}

/// Pick-and-place success: cube resting at the target, gripper withdrawn.
pub fn placed(state: &WorldState) -> bool {
    !state.attached && dist(&state.cube_pos, &state.target_pos) < SUCCESS_RADIUS
}
