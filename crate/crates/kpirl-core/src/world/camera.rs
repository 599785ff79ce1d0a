//! Pinhole-free overhead camera: an affine map from world coordinates to
//! pixels plus an in-frame visibility bit.

use serde::{Deserialize, Serialize};

use crate::types::{Keypoint, KeypointFrame, LatentState, StateLayout};
use crate::world::sim::{elbow_pos, ee_pos, WorldState, DOF};

/// Keypoints are reported in a fixed order; index by these, not literals.
pub const KP_ELBOW: usize = 0;
pub const KP_EE: usize = 1;
pub const KP_CUBE: usize = 2;
pub const KP_TARGET: usize = 3;
pub const NUM_KEYPOINTS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Camera {
    pub scale: f64,
    pub offset: [f64; 2],
    pub frame_size: [f64; 2],
}

impl Default for Camera {
    fn default() -> Self {
        // 64x64 frame centered on the origin; the arm's 2 m reach maps
        // exactly onto the frame edges.
        Camera {
            scale: 16.0,
            offset: [32.0, 32.0],
            frame_size: [64.0, 64.0],
        }
    }
}

impl Camera {
    /// World point to pixel keypoint. Intensity is 1 inside the frame
    /// (edges included) and 0 outside; coordinates are reported either way.
    pub fn project(&self, p: &[f64; 2]) -> Keypoint {
        let x = self.offset[0] + self.scale * p[0];
        let y = self.offset[1] + self.scale * p[1];
        let visible = (0.0..=self.frame_size[0]).contains(&x)
            && (0.0..=self.frame_size[1]).contains(&y);
        Keypoint::new(x, y, if visible { 1.0 } else { 0.0 })
    }

    /// Pixel coordinates back to world coordinates.
    pub fn unproject(&self, px: f64, py: f64) -> [f64; 2] {
        [
            (px - self.offset[0]) / self.scale,
            (py - self.offset[1]) / self.scale,
        ]
    }
}

/// Keypoints for the current world state: elbow, end effector, cube,
/// target, in that order.
pub fn observe_keypoints(camera: &Camera, state: &WorldState) -> KeypointFrame {
    KeypointFrame::new(vec![
        camera.project(&elbow_pos(&state.q)),
        camera.project(&ee_pos(&state.q)),
        camera.project(&state.cube_pos),
        camera.project(&state.target_pos),
    ])
}

/// Full latent observation: keypoints plus joint positions and velocities.
pub fn observe_latent(camera: &Camera, state: &WorldState) -> LatentState {
    LatentState {
        frame: observe_keypoints(camera, state),
        q: state.q.to_vec(),
        q_dot: state.q_dot.to_vec(),
    }
}

pub fn world_layout() -> StateLayout {
    StateLayout::new(NUM_KEYPOINTS, DOF)
}
