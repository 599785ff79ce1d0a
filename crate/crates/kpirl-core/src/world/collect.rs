//! Demonstration and dynamics-data collection.
//!
//! Demonstrations run the scripted expert at 30 Hz internally and keep
//! every sixth observation, so stored frames advance at the 5 Hz control
//! rate. Dynamics data runs directly at the control rate with a seeded
//! expert/random action mix.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{Demonstration, KeypointFrame, LatentState, Transition};
use crate::world::camera::{observe_keypoints, observe_latent, Camera};
use crate::world::expert::scripted_expert;
use crate::world::sim::{dist, placed, step_env, step_env_dt, WorldState, ACTION_DIM, VEL_LIMIT};

/// Demonstrations are recorded at this rate and subsampled down to 5 Hz.
pub const DEMO_RECORD_HZ: u32 = 30;
const SUBSTEPS: u32 = DEMO_RECORD_HZ / 5;
/// Episode cap in control-rate steps.
pub const MAX_EPISODE_STEPS: u32 = 100;

/// Cube and target spawn uniformly over this annulus of the reachable disk.
pub const SPAWN_R_MIN: f64 = 0.5;
pub const SPAWN_R_MAX: f64 = 1.8;
/// Reject spawns that start out already solved (or nearly so).
const MIN_CUBE_TARGET_SEP: f64 = 0.1;

/// Start pose for every scenario, elbow bent to keep the arm off its
/// singularity.
pub const START_Q: [f64; 2] = [std::f64::consts::FRAC_PI_2, -std::f64::consts::FRAC_PI_2];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub id: u64,
    pub cube: [f64; 2],
    pub target: [f64; 2],
}

impl Scenario {
    pub fn initial_state(&self) -> WorldState {
        WorldState::new(START_Q, self.cube, self.target)
    }
}

fn sample_point(rng: &mut ChaCha8Rng) -> [f64; 2] {
    let u: f64 = rng.gen();
    let r = (u * (SPAWN_R_MAX * SPAWN_R_MAX - SPAWN_R_MIN * SPAWN_R_MIN)
        + SPAWN_R_MIN * SPAWN_R_MIN)
        .sqrt();
    let theta = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
    [r * theta.cos(), r * theta.sin()]
}

/// Next scenario from the stream: cube and target uniform over the annulus,
/// re-drawing the target until it clears the cube.
pub fn sample_scenario(id: u64, rng: &mut ChaCha8Rng) -> Scenario {
    let cube = sample_point(rng);
    let mut target = sample_point(rng);
    while dist(&cube, &target) < MIN_CUBE_TARGET_SEP {
        target = sample_point(rng);
    }
    Scenario { id, cube, target }
}

/// One expert rollout, fully recorded.
pub struct ExpertEpisode {
    pub frames: Vec<KeypointFrame>,
    pub latents: Vec<LatentState>,
    pub actions: Vec<[f64; ACTION_DIM]>,
    pub success: bool,
}

/// Runs the scripted expert on a scenario at `DEMO_RECORD_HZ`, keeping
/// control-rate keyframes. The stored action for a keyframe is the expert
/// command at that keyframe's state; within the frame the expert keeps
/// re-deciding at the recording rate.
pub fn run_expert_episode(camera: &Camera, scenario: &Scenario) -> Result<ExpertEpisode> {
    let sub_dt = 1.0 / DEMO_RECORD_HZ as f64;
    let mut state = scenario.initial_state();
    let mut ep = ExpertEpisode {
        frames: vec![observe_keypoints(camera, &state)],
        latents: vec![observe_latent(camera, &state)],
        actions: Vec::new(),
        success: false,
    };
    for _ in 0..MAX_EPISODE_STEPS {
        let mut keyframe_action = None;
        for _ in 0..SUBSTEPS {
            let a = scripted_expert(&state);
            keyframe_action.get_or_insert(a);
            state = step_env_dt(&state, &a, sub_dt)?;
        }
        ep.actions.push(keyframe_action.unwrap());
        ep.frames.push(observe_keypoints(camera, &state));
        ep.latents.push(observe_latent(camera, &state));
        if placed(&state) {
            ep.success = true;
            break;
        }
    }
    Ok(ep)
}

/// Demonstrations plus the expert state-action transitions recorded along
/// the way.
pub struct DemoBatch {
    pub demos: Vec<Demonstration>,
    pub expert_transitions: Vec<Transition>,
    /// Scenarios the expert failed to finish and that were re-drawn.
    pub resampled: u32,
}

/// Collects `n` successful expert demonstrations. Scenarios the expert
/// cannot finish inside the episode cap are re-drawn from the stream and
/// counted in `resampled`.
pub fn collect_demos(n: usize, seed: u64, camera: &Camera) -> Result<DemoBatch> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut batch = DemoBatch {
        demos: Vec::with_capacity(n),
        expert_transitions: Vec::new(),
        resampled: 0,
    };
    let mut next_id = 0;
    while batch.demos.len() < n {
        let scenario = sample_scenario(next_id, &mut rng);
        next_id += 1;
        let ep = run_expert_episode(camera, &scenario)?;
        if !ep.success {
            batch.resampled += 1;
            if batch.resampled > 50 * n as u32 + 50 {
                return Err(Error::InvalidInput(format!(
                    "expert failed {} scenarios while collecting {n} demos",
                    batch.resampled
                )));
            }
            continue;
        }
        let goal = ep.frames.last().unwrap().clone();
        let s0 = &ep.latents[0];
        batch.demos.push(Demonstration {
            scenario_id: scenario.id,
            frames: ep.frames.clone(),
            initial_q: s0.q.clone(),
            initial_q_dot: s0.q_dot.clone(),
            goal,
        });
        for t in 0..ep.actions.len() {
            batch.expert_transitions.push(Transition {
                state: ep.latents[t].clone(),
                action: ep.actions[t].to_vec(),
                next_state: ep.latents[t + 1].clone(),
            });
        }
    }
    Ok(batch)
}

/// Transition dataset with bookkeeping on how it was gathered.
pub struct DynBatch {
    pub transitions: Vec<Transition>,
    pub expert_steps: usize,
}

impl DynBatch {
    pub fn expert_fraction(&self) -> f64 {
        if self.transitions.is_empty() {
            0.0
        } else {
            self.expert_steps as f64 / self.transitions.len() as f64
        }
    }
}

const DYN_EPISODE_STEPS: u32 = 40;

/// Chance per exploration step of drawing a fresh random action instead of
/// holding the previous one. Held actions produce the sustained directional
/// sweeps planners like to emit; purely independent draws random-walk in
/// place and leave those trajectories out of the training distribution.
const EXPLORE_RESAMPLE: f64 = 0.25;

/// Collects `n_steps` control-rate transitions for dynamics learning. Each
/// step independently follows the expert with probability `expert_mix`,
/// otherwise applies a persistent random action; episodes rotate through
/// fresh scenarios so the data covers both free motion and carrying the
/// cube.
pub fn collect_dyn_data(
    n_steps: usize,
    expert_mix: f64,
    seed: u64,
    camera: &Camera,
) -> Result<DynBatch> {
    if !(0.0..=1.0).contains(&expert_mix) {
        return Err(Error::InvalidInput(format!(
            "expert_mix {expert_mix} outside [0, 1]"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut batch = DynBatch {
        transitions: Vec::with_capacity(n_steps),
        expert_steps: 0,
    };
    let mut scenario_id = 0;
    while batch.transitions.len() < n_steps {
        let scenario = sample_scenario(scenario_id, &mut rng);
        scenario_id += 1;
        let mut state = scenario.initial_state();
        let mut latent = observe_latent(camera, &state);
        let mut held: Option<Vec<f64>> = None;
        for _ in 0..DYN_EPISODE_STEPS {
            let action = if rng.gen::<f64>() < expert_mix {
                batch.expert_steps += 1;
                scripted_expert(&state).to_vec()
            } else {
                if held.is_none() || rng.gen::<f64>() < EXPLORE_RESAMPLE {
                    held = Some(
                        (0..ACTION_DIM)
                            .map(|_| rng.gen_range(-VEL_LIMIT..VEL_LIMIT))
                            .collect(),
                    );
                }
                held.clone().expect("just sampled")
            };
            state = step_env(&state, &action)?;
            let next = observe_latent(camera, &state);
            batch.transitions.push(Transition {
                state: latent,
                action,
                next_state: next.clone(),
            });
            latent = next;
            if batch.transitions.len() >= n_steps || placed(&state) {
                break;
            }
        }
    }
    Ok(batch)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::sim::SUCCESS_RADIUS;

    #[test]
    fn spawns_stay_in_annulus() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for i in 0..200 {
            let s = sample_scenario(i, &mut rng);
            for p in [s.cube, s.target] {
                let r = (p[0] * p[0] + p[1] * p[1]).sqrt();
                assert!((SPAWN_R_MIN..=SPAWN_R_MAX).contains(&r), "radius {r}");
            }
            assert!(dist(&s.cube, &s.target) >= MIN_CUBE_TARGET_SEP);
        }
    }

    #[test]
    fn expert_succeeds_on_sampled_scenarios() {
        // The headline reliability bar for the scripted controller.
        let camera = Camera::default();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut successes = 0;
        let total = 200;
        for i in 0..total {
            let s = sample_scenario(i, &mut rng);
            if run_expert_episode(&camera, &s).unwrap().success {
                successes += 1;
            }
        }
        assert!(
            successes * 100 >= total * 95,
            "expert solved {successes}/{total}"
        );
    }

    #[test]
    fn demos_end_placed_and_have_shape() {
        let camera = Camera::default();
        let batch = collect_demos(5, 9, &camera).unwrap();
        assert_eq!(batch.demos.len(), 5);
        for d in &batch.demos {
            assert!(d.frames.len() >= 2);
            assert!(d.frames.len() <= MAX_EPISODE_STEPS as usize + 1);
            assert_eq!(&d.goal, d.frames.last().unwrap());
            // Final frame: cube keypoint on the target keypoint.
            let last = d.frames.last().unwrap();
            let cube = last.keypoints[crate::world::camera::KP_CUBE];
            let target = last.keypoints[crate::world::camera::KP_TARGET];
            let px_dist = ((cube.x - target.x).powi(2) + (cube.y - target.y).powi(2)).sqrt();
            let cam_scale = camera.scale;
            assert!(px_dist < cam_scale * SUCCESS_RADIUS, "pixel distance {px_dist}");
        }
    }

    #[test]
    fn demo_collection_is_deterministic() {
        let camera = Camera::default();
        let a = collect_demos(3, 42, &camera).unwrap();
        let b = collect_demos(3, 42, &camera).unwrap();
        assert_eq!(a.demos, b.demos);
        assert_eq!(a.expert_transitions, b.expert_transitions);
    }

    #[test]
    fn zero_demos_is_empty() {
        let camera = Camera::default();
        let batch = collect_demos(0, 1, &camera).unwrap();
        assert!(batch.demos.is_empty());
        assert!(batch.expert_transitions.is_empty());
    }

    #[test]
    fn expert_transitions_chain() {
        let camera = Camera::default();
        let batch = collect_demos(2, 5, &camera).unwrap();
        assert!(!batch.expert_transitions.is_empty());
        for t in &batch.expert_transitions {
            assert_eq!(t.action.len(), ACTION_DIM);
            assert_eq!(t.state.dim(), 16);
            assert_eq!(t.next_state.dim(), 16);
        }
    }

    #[test]
    fn dyn_data_mix_fraction() {
        let camera = Camera::default();
        let batch = collect_dyn_data(5000, 0.5, 23, &camera).unwrap();
        assert_eq!(batch.transitions.len(), 5000);
        let f = batch.expert_fraction();
        assert!((f - 0.5).abs() < 0.05, "expert fraction {f}");
    }

    #[test]
    fn dyn_data_extremes() {
        let camera = Camera::default();
        let none = collect_dyn_data(300, 0.0, 7, &camera).unwrap();
        assert_eq!(none.expert_steps, 0);
        let all = collect_dyn_data(300, 1.0, 7, &camera).unwrap();
        assert_eq!(all.expert_steps, 300);
        assert!(collect_dyn_data(10, 1.5, 7, &camera).is_err());
    }

    #[test]
    fn dyn_data_is_deterministic() {
        let camera = Camera::default();
        let a = collect_dyn_data(200, 0.5, 77, &camera).unwrap();
        let b = collect_dyn_data(200, 0.5, 77, &camera).unwrap();
        assert_eq!(a.transitions, b.transitions);
    }
}
