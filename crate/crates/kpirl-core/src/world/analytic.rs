//! Ground-truth latent dynamics built from the simulator rules.
//!
//! Decodes a latent row back into world quantities, applies the same
//! kinematics and grasp logic as the environment step, and re-encodes
//! through the camera. Serves as the upper-bound stand-in for a learned
//! model in planner and evaluation checks.

use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::planner::LatentDynamics;

use super::camera::{world_layout, Camera, KP_CUBE, KP_TARGET};
use super::sim::{
    dist, ee_pos, elbow_pos, wrap_angle, ACTION_DIM, CONTROL_DT, DOF, GRASP_RADIUS, VEL_LIMIT,
};

/// Treats end effector and cube as attached when their decoded positions
/// coincide; generous enough for projection round-trip noise, far below
/// any genuine separation.
const ATTACH_EPS: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct AnalyticLatentModel {
    pub camera: Camera,
}

impl AnalyticLatentModel {
    pub fn new(camera: Camera) -> Self {
        AnalyticLatentModel { camera }
    }
}

impl LatentDynamics for AnalyticLatentModel {
    fn state_dim(&self) -> usize {
        world_layout().dim()
    }

    fn action_dim(&self) -> usize {
        ACTION_DIM
    }

    fn predict(&self, state: &Tensor, action: &Tensor) -> Result<Tensor> {
        let l = world_layout();
        if state.shape() != (1, l.dim()) {
            return Err(Error::shape(
                "analytic model state",
                format!("1x{}", l.dim()),
                state.shape_str(),
            ));
        }
        if action.shape() != (1, ACTION_DIM) {
            return Err(Error::shape(
                "analytic model action",
                format!("1x{ACTION_DIM}"),
                action.shape_str(),
            ));
        }
        let s = state.data();
        let u = action.data();

        let q = [s[l.q_range().start], s[l.q_range().start + 1]];
        let cube = self
            .camera
            .unproject(s[l.x_col(KP_CUBE)], s[l.y_col(KP_CUBE)]);
        let target = self
            .camera
            .unproject(s[l.x_col(KP_TARGET)], s[l.y_col(KP_TARGET)]);
        let was_attached = dist(&ee_pos(&q), &cube) < ATTACH_EPS;

        let w = [
            u[0].clamp(-VEL_LIMIT, VEL_LIMIT),
            u[1].clamp(-VEL_LIMIT, VEL_LIMIT),
        ];
        let closed = u[2] > 0.0;
        let mut q_next = [0.0; DOF];
        for i in 0..DOF {
            q_next[i] = wrap_angle(q[i] + w[i] * CONTROL_DT);
        }
        let ee_next = ee_pos(&q_next);
        let attached = if was_attached {
            closed
        } else {
            closed && dist(&ee_next, &cube) < GRASP_RADIUS
        };
        let cube_next = if attached { ee_next } else { cube };

        let kps = [
            self.camera.project(&elbow_pos(&q_next)),
            self.camera.project(&ee_next),
            self.camera.project(&cube_next),
            self.camera.project(&target),
        ];
        let mut out = vec![0.0; l.dim()];
        for (k, kp) in kps.iter().enumerate() {
            out[l.x_col(k)] = kp.x;
            out[l.y_col(k)] = kp.y;
            out[l.intensity_range().start + k] = kp.intensity;
        }
        out[l.q_range().start] = q_next[0];
        out[l.q_range().start + 1] = q_next[1];
        out[l.q_dot_range().start] = w[0];
        out[l.q_dot_range().start + 1] = w[1];
        Tensor::new(1, l.dim(), out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::camera::{observe_latent, KP_EE};
    use crate::world::sim::{step_env, WorldState};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn row_close(a: &Tensor, b: &Tensor, tol: f64) -> bool {
        a.shape() == b.shape()
            && a.data()
                .iter()
                .zip(b.data())
                .all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn matches_environment_over_random_rollout() {
        let camera = Camera::default();
        let model = AnalyticLatentModel::new(camera.clone());
        let mut env = WorldState::new(
            [std::f64::consts::FRAC_PI_2, -std::f64::consts::FRAC_PI_2],
            [0.9, 0.7],
            [-0.4, 1.1],
        );
        let mut latent = observe_latent(&camera, &env).to_row();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..40 {
            let action: Vec<f64> = (0..ACTION_DIM).map(|_| rng.gen_range(-1.0..1.0)).collect();
            env = step_env(&env, &action).unwrap();
            let truth = observe_latent(&camera, &env).to_row();
            latent = model
                .predict(&latent, &Tensor::row(action.clone()))
                .unwrap();
            assert!(
                row_close(&latent, &truth, 1e-9),
                "analytic model diverged from environment"
            );
        }
    }

    #[test]
    fn grasp_attach_and_release() {
        let camera = Camera::default();
        let model = AnalyticLatentModel::new(camera.clone());
        let q = [0.3, 0.4];
        let cube = ee_pos(&q);
        let env = WorldState::new(q, [cube[0] + 0.05, cube[1]], [-0.5, 0.5]);
        let s0 = observe_latent(&camera, &env).to_row();
        let l = world_layout();

        let grab = model.predict(&s0, &Tensor::row(vec![0.0, 0.0, 1.0])).unwrap();
        let held_ee = [
            grab.get(0, l.x_col(KP_EE)),
            grab.get(0, l.y_col(KP_EE)),
        ];
        assert!((grab.get(0, l.x_col(KP_CUBE)) - held_ee[0]).abs() < 1e-12);
        assert!((grab.get(0, l.y_col(KP_CUBE)) - held_ee[1]).abs() < 1e-12);

        let carry = model
            .predict(&grab, &Tensor::row(vec![0.5, -0.3, 1.0]))
            .unwrap();
        assert!((carry.get(0, l.x_col(KP_CUBE)) - carry.get(0, l.x_col(KP_EE))).abs() < 1e-12);

        let drop = model
            .predict(&carry, &Tensor::row(vec![0.5, 0.5, -1.0]))
            .unwrap();
        assert!(
            (drop.get(0, l.x_col(KP_CUBE)) - carry.get(0, l.x_col(KP_CUBE))).abs() < 1e-12,
            "released cube should stay put"
        );
        assert!(
            (drop.get(0, l.x_col(KP_EE)) - carry.get(0, l.x_col(KP_EE))).abs() > 1e-6,
            "arm should keep moving after release"
        );
    }
}
