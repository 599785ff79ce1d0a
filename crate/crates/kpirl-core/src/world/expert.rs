//! Scripted pick-and-place controller used to produce demonstrations.
//!
//! Damped-least-squares inverse kinematics drives the end effector through
//! the task phases: approach the cube with the gripper open, close within
//! grasp range, carry to the target, release.

use crate::world::sim::{
    angle_diff, dist, ee_pos, jacobian, WorldState, DOF, GRASP_RADIUS, SUCCESS_RADIUS, VEL_LIMIT,
};

/// Damping for the least-squares pseudo-inverse.
const DLS_LAMBDA: f64 = 0.1;
/// Proportional gain on end-effector error.
const KP: f64 = 2.0;
/// Elbow velocity used to bend out of a straightened (singular) arm.
const SINGULAR_ESCAPE_VEL: f64 = 0.2;
/// |sin q_1| below this counts as singular.
const SINGULAR_EPS: f64 = 1e-4;

/// Joint velocities toward a workspace goal via damped least squares:
/// `dq = J^T (J J^T + lambda^2 I)^-1 * kp * (goal - ee)`, clamped to the
/// velocity limits. A straightened arm cannot move radially, so near the
/// singularity the controller instead bends the elbow for one step.
pub fn ik_velocity(q: &[f64; DOF], goal: &[f64; 2]) -> [f64; DOF] {
    if q[1].sin().abs() < SINGULAR_EPS {
        return [0.0, SINGULAR_ESCAPE_VEL];
    }
    let ee = ee_pos(q);
    let e = [KP * (goal[0] - ee[0]), KP * (goal[1] - ee[1])];
    let j = jacobian(q);
    // A = J J^T + lambda^2 I, 2x2 symmetric.
    let a00 = j[0][0] * j[0][0] + j[0][1] * j[0][1] + DLS_LAMBDA * DLS_LAMBDA;
    let a01 = j[0][0] * j[1][0] + j[0][1] * j[1][1];
    let a11 = j[1][0] * j[1][0] + j[1][1] * j[1][1] + DLS_LAMBDA * DLS_LAMBDA;
    let det = a00 * a11 - a01 * a01;
    // det >= lambda^4 by construction, so this division is safe.
    let y = [
        (a11 * e[0] - a01 * e[1]) / det,
        (a00 * e[1] - a01 * e[0]) / det,
    ];
    let dq = [
        j[0][0] * y[0] + j[1][0] * y[1],
        j[0][1] * y[0] + j[1][1] * y[1],
    ];
    [
        dq[0].clamp(-VEL_LIMIT, VEL_LIMIT),
        dq[1].clamp(-VEL_LIMIT, VEL_LIMIT),
    ]
}

/// One expert action for the current state.
pub fn scripted_expert(state: &WorldState) -> [f64; 3] {
    if expert_done(state) {
        // Placed. Hold still with the gripper open, or the cube (still in
        // grasp range after release) would immediately be picked back up.
        return [0.0, 0.0, -1.0];
    }
    let ee = ee_pos(&state.q);
    if state.attached {
        if dist(&ee, &state.target_pos) < SUCCESS_RADIUS {
            // Over the target: let go and hold still.
            return [0.0, 0.0, -1.0];
        }
        let dq = ik_velocity(&state.q, &state.target_pos);
        return [dq[0], dq[1], 1.0];
    }
    let d = dist(&ee, &state.cube_pos);
    let dq = ik_velocity(&state.q, &state.cube_pos);
    if d < GRASP_RADIUS {
        // In range: close while still centering on the cube.
        [dq[0], dq[1], 1.0]
    } else {
        [dq[0], dq[1], -1.0]
    }
}

/// True once the expert has nothing left to do.
pub fn expert_done(state: &WorldState) -> bool {
    !state.attached && dist(&state.cube_pos, &state.target_pos) < SUCCESS_RADIUS
}

/// Drives `q` one velocity-limited step along the shortest angular path to
/// `q_goal`; handy for tests that need the arm somewhere specific.
pub fn joint_step_toward(q: &[f64; DOF], q_goal: &[f64; DOF]) -> [f64; DOF] {
    [
        angle_diff(q_goal[0], q[0]).clamp(-VEL_LIMIT, VEL_LIMIT),
        angle_diff(q_goal[1], q[1]).clamp(-VEL_LIMIT, VEL_LIMIT),
    ]
}
