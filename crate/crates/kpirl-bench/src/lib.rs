//! Shared setup for the benchmarks: deterministic models, costs, and a
//! synthetic demonstration, all sized like the planar arm task.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use kpirl_core::dynamics::DynModel;
use kpirl_core::irl::{CostParams, CostVariant, IrlTrainConfig};
use kpirl_core::types::{Demonstration, Keypoint, KeypointFrame, StateLayout};
use kpirl_core::world::{world_layout, ACTION_DIM, START_Q};

pub fn layout() -> StateLayout {
    world_layout()
}

pub fn model(seed: u64) -> DynModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DynModel::init(layout(), ACTION_DIM, &[64, 64], &mut rng).unwrap()
}

pub fn cost_params(time_steps: usize, seed: u64) -> CostParams {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    CostParams::init(CostVariant::Weighted, 4, time_steps, &[16], &mut rng).unwrap()
}

/// A demo whose keypoints drift linearly toward its final frame.
pub fn demo(frames: usize) -> Demonstration {
    let frame_at = |t: usize| {
        let p = t as f64 / (frames - 1) as f64;
        KeypointFrame::new(
            (0..4)
                .map(|k| {
                    let k = k as f64;
                    Keypoint::new(30.0 + 2.0 * k + 4.0 * p, 34.0 - k - 3.0 * p, 1.0)
                })
                .collect(),
        )
    };
    let goal = frame_at(frames - 1);
    Demonstration {
        scenario_id: 0,
        frames: (0..frames).map(frame_at).collect(),
        initial_q: START_Q.to_vec(),
        initial_q_dot: vec![0.0; 2],
        goal,
    }
}

pub fn irl_config(horizon: usize) -> IrlTrainConfig {
    IrlTrainConfig {
        horizon,
        ..IrlTrainConfig::default()
    }
}
