//! Shared observation and trajectory types.

use serde::{Deserialize, Serialize};

use crate::autodiff::Tensor;
use crate::error::{Error, Result};

/// One tracked point in image space: pixel x, pixel y, and a visibility
/// intensity in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Keypoint {
    pub x: f64,
    pub y: f64,
    pub intensity: f64,
}

impl Keypoint {
    pub fn new(x: f64, y: f64, intensity: f64) -> Self {
        Keypoint { x, y, intensity }
    }
}

/// All keypoints observed in one camera frame, in a fixed order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeypointFrame {
    pub keypoints: Vec<Keypoint>,
}

impl KeypointFrame {
    pub fn new(keypoints: Vec<Keypoint>) -> Self {
        KeypointFrame { keypoints }
    }

    pub fn len(&self) -> usize {
        self.keypoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keypoints.is_empty()
    }

    /// Flattened block layout: all x coordinates, then all y, then all
    /// intensities. Keeping each channel contiguous lets downstream code
    /// slice whole channels out of a state vector.
    pub fn to_flat(&self) -> Vec<f64> {
        let k = self.keypoints.len();
        let mut out = Vec::with_capacity(3 * k);
        out.extend(self.keypoints.iter().map(|p| p.x));
        out.extend(self.keypoints.iter().map(|p| p.y));
        out.extend(self.keypoints.iter().map(|p| p.intensity));
        out
    }

    pub fn from_flat(flat: &[f64]) -> Result<Self> {
        if flat.len() % 3 != 0 {
            return Err(Error::shape(
                "KeypointFrame::from_flat",
                "multiple of 3",
                flat.len().to_string(),
            ));
        }
        let k = flat.len() / 3;
        let keypoints = (0..k)
            .map(|i| Keypoint::new(flat[i], flat[k + i], flat[2 * k + i]))
            .collect();
        Ok(KeypointFrame { keypoints })
    }
}

/// Column layout of a flattened latent state
/// `[x_0..x_K, y_0..y_K, m_0..m_K, q_0..q_D, qdot_0..qdot_D]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateLayout {
    pub num_keypoints: usize,
    pub dof: usize,
}

impl StateLayout {
    pub fn new(num_keypoints: usize, dof: usize) -> Self {
        StateLayout { num_keypoints, dof }
    }

    pub fn dim(&self) -> usize {
        3 * self.num_keypoints + 2 * self.dof
    }

    pub fn x_range(&self) -> std::ops::Range<usize> {
        0..self.num_keypoints
    }

    pub fn y_range(&self) -> std::ops::Range<usize> {
        self.num_keypoints..2 * self.num_keypoints
    }

    /// Both coordinate channels; relies on x and y being adjacent blocks.
    pub fn xy_range(&self) -> std::ops::Range<usize> {
        0..2 * self.num_keypoints
    }

    pub fn intensity_range(&self) -> std::ops::Range<usize> {
        2 * self.num_keypoints..3 * self.num_keypoints
    }

    pub fn q_range(&self) -> std::ops::Range<usize> {
        3 * self.num_keypoints..3 * self.num_keypoints + self.dof
    }

    pub fn q_dot_range(&self) -> std::ops::Range<usize> {
        3 * self.num_keypoints + self.dof..self.dim()
    }

    pub fn x_col(&self, k: usize) -> usize {
        k
    }

    pub fn y_col(&self, k: usize) -> usize {
        self.num_keypoints + k
    }
}

/// Keypoint observation plus proprioception, the state the dynamics model
/// and planners operate on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentState {
    pub frame: KeypointFrame,
    pub q: Vec<f64>,
    pub q_dot: Vec<f64>,
}

impl LatentState {
    pub fn new(frame: KeypointFrame, q: Vec<f64>, q_dot: Vec<f64>) -> Result<Self> {
        if q.len() != q_dot.len() {
            return Err(Error::shape(
                "LatentState::new",
                format!("{} velocities", q.len()),
                q_dot.len().to_string(),
            ));
        }
        Ok(LatentState { frame, q, q_dot })
    }

    pub fn layout(&self) -> StateLayout {
        StateLayout::new(self.frame.len(), self.q.len())
    }

    pub fn dim(&self) -> usize {
        self.layout().dim()
    }

    /// 1 x dim row in the block layout described on [`StateLayout`].
    pub fn to_row(&self) -> Tensor {
        let mut data = self.frame.to_flat();
        data.extend_from_slice(&self.q);
        data.extend_from_slice(&self.q_dot);
        Tensor::row(data)
    }

    pub fn from_row(row: &Tensor, layout: StateLayout) -> Result<Self> {
        if row.rows() != 1 || row.cols() != layout.dim() {
            return Err(Error::shape(
                "LatentState::from_row",
                format!("1x{}", layout.dim()),
                row.shape_str(),
            ));
        }
        let d = row.data();
        let frame = KeypointFrame::from_flat(&d[0..3 * layout.num_keypoints])?;
        Ok(LatentState {
            frame,
            q: d[layout.q_range()].to_vec(),
            q_dot: d[layout.q_dot_range()].to_vec(),
        })
    }
}

/// A sequence of latent states at the control rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub states: Vec<LatentState>,
}

impl Trajectory {
    pub fn new(states: Vec<LatentState>) -> Self {
        Trajectory { states }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

/// One recorded expert episode: keypoint frames at the control rate, the
/// arm's starting configuration, and the final frame as the goal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Demonstration {
    pub scenario_id: u64,
    pub frames: Vec<KeypointFrame>,
    pub initial_q: Vec<f64>,
    pub initial_q_dot: Vec<f64>,
    pub goal: KeypointFrame,
}

impl Demonstration {
    /// Latent state at the first frame, the anchor a planner starts from.
    pub fn initial_state(&self) -> Result<LatentState> {
        let frame = self
            .frames
            .first()
            .ok_or_else(|| Error::InvalidInput("demonstration has no frames".into()))?;
        LatentState::new(frame.clone(), self.initial_q.clone(), self.initial_q_dot.clone())
    }
}

/// One dynamics transition: state, applied action, successor state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: LatentState,
    pub action: Vec<f64>,
    pub next_state: LatentState,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame2() -> KeypointFrame {
        KeypointFrame::new(vec![
            Keypoint::new(1.0, 2.0, 1.0),
            Keypoint::new(3.0, 4.0, 0.0),
        ])
    }

    #[test]
    fn flat_layout_is_blocked_by_channel() {
        assert_eq!(frame2().to_flat(), vec![1.0, 3.0, 2.0, 4.0, 1.0, 0.0]);
    }

    #[test]
    fn frame_flat_round_trip() {
        let f = frame2();
        assert_eq!(KeypointFrame::from_flat(&f.to_flat()).unwrap(), f);
    }

    #[test]
    fn state_row_round_trip() {
        let s = LatentState::new(frame2(), vec![0.1, -0.2], vec![0.3, 0.4]).unwrap();
        let layout = s.layout();
        assert_eq!(layout.dim(), 10);
        let row = s.to_row();
        assert_eq!(row.cols(), 10);
        let back = LatentState::from_row(&row, layout).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn layout_ranges_tile_the_state() {
        let l = StateLayout::new(4, 2);
        assert_eq!(l.dim(), 16);
        assert_eq!(l.x_range(), 0..4);
        assert_eq!(l.y_range(), 4..8);
        assert_eq!(l.intensity_range(), 8..12);
        assert_eq!(l.q_range(), 12..14);
        assert_eq!(l.q_dot_range(), 14..16);
        assert_eq!(l.y_col(2), 6);
    }

    #[test]
    fn mismatched_velocity_length_rejected() {
        assert!(LatentState::new(frame2(), vec![0.1], vec![0.3, 0.4]).is_err());
    }
}
