//! Evaluates the learned cost by running the receding-horizon controller
//! on freshly sampled scenarios and scoring cube placement.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use kpirl_core::irl::{load_cost, LearnedCost};
use kpirl_core::planner::{mpc_execute, CemPlanner, MpcConfig};
use kpirl_core::types::KeypointFrame;
use kpirl_core::weights::load_dyn_model;
use kpirl_core::world::{
    dist, observe_keypoints, sample_scenario, world_layout, Camera, Scenario, WorldState,
    LINK_1, LINK_2,
};

use super::Ctx;
use crate::config::SCALE_NOTE;
use crate::error::{at_path, AppResult};
use crate::files::{guard_outputs, write_eval_report, EvalReport, ScenarioResult};

pub fn run(ctx: &Ctx) -> AppResult<()> {
    let cfg = &ctx.cfg;
    let cost_path = cfg.path(&cfg.paths.cost);
    let model_path = cfg.path(&cfg.paths.dyn_model);
    let report_path = cfg.path(&cfg.paths.eval_report);
    guard_outputs(&[&report_path], ctx.overwrite)?;
    ctx.prepare_out_dir()?;

    let (params, cost_stamp) = load_cost(&cost_path).map_err(|e| at_path(&cost_path, e))?;
    ctx.note_provenance(&cost_path, &cost_stamp.config_hash);
    let (model, model_stamp) = load_dyn_model(&model_path).map_err(|e| at_path(&model_path, e))?;
    ctx.note_provenance(&model_path, &model_stamp.config_hash);

    let camera = Camera::default();
    let layout = world_layout();
    let threshold = cfg.eval.success_threshold;
    let mpc_cfg = MpcConfig {
        max_steps: cfg.eval.max_steps,
        warm_start: cfg.eval.warm_start,
    };

    // One master stream drives scenario draws and per-scenario planner
    // seeds, so the whole evaluation is pinned by the run seed.
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut scenarios = Vec::with_capacity(cfg.eval_scenarios);
    for i in 0..cfg.eval_scenarios {
        let scenario = sample_scenario(i as u64, &mut rng);
        let planner_seed: u64 = rng.gen();

        let goal = goal_frame(&camera, &scenario);
        let cost = LearnedCost {
            params: &params,
            goal: &goal,
            layout,
        };
        let mut planner_cfg = cfg.planner.clone();
        planner_cfg.seed = planner_seed;
        let mut planner = CemPlanner::new(&model, &cost, planner_cfg);

        let outcome = mpc_execute(
            &scenario.initial_state(),
            &camera,
            &mut planner,
            |s| !s.attached && dist(&s.cube_pos, &s.target_pos) < threshold,
            &mpc_cfg,
        )?;
        let last = outcome.states.last().expect("run records the initial state");
        let final_dist = dist(&last.cube_pos, &last.target_pos);
        let steps = outcome.states.len() - 1;
        println!(
            "scenario {i}: {} after {steps} steps, cube {final_dist:.3} from target",
            if outcome.success { "success" } else { "failure" },
        );
        scenarios.push(ScenarioResult {
            id: scenario.id,
            cube: scenario.cube,
            target: scenario.target,
            success: outcome.success,
            final_cube_target_dist: final_dist,
            steps,
        });
    }

    let successes = scenarios.iter().filter(|s| s.success).count();
    let success_rate = if scenarios.is_empty() {
        None
    } else {
        Some(successes as f64 / scenarios.len() as f64)
    };
    let report = EvalReport {
        kind: "eval".into(),
        config_hash: ctx.hash.clone(),
        seed: cfg.seed,
        note: SCALE_NOTE.into(),
        success_threshold: threshold,
        success_rate,
        success_rate_defined: success_rate.is_some(),
        scenarios,
    };
    write_eval_report(&report_path, &report)?;

    match success_rate {
        Some(rate) => println!(
            "success rate {successes}/{}: {rate:.2}",
            report.scenarios.len()
        ),
        None => println!("success rate undefined: no scenarios evaluated"),
    }
    Ok(())
}

/// Keypoint frame of the finished task: cube on the target with the arm
/// posed over it, the same picture a successful demonstration ends on.
/// The arm pose comes from closed-form two-link kinematics, taking the
/// negative-elbow branch the expert's start pose lives on.
fn goal_frame(camera: &Camera, scenario: &Scenario) -> KeypointFrame {
    let [tx, ty] = scenario.target;
    let r2 = tx * tx + ty * ty;
    let c2 = ((r2 - LINK_1 * LINK_1 - LINK_2 * LINK_2) / (2.0 * LINK_1 * LINK_2)).clamp(-1.0, 1.0);
    let q2 = -c2.acos();
    let q1 = ty.atan2(tx) - (LINK_2 * q2.sin()).atan2(LINK_1 + LINK_2 * c2);
    let done = WorldState::new([q1, q2], scenario.target, scenario.target);
    observe_keypoints(camera, &done)
}

#[cfg(test)]
mod tests {
    use super::*;
    use kpirl_core::world::{ee_pos, KP_CUBE, KP_EE, KP_TARGET};

    #[test]
    fn goal_frame_puts_arm_and_cube_on_the_target() {
        let camera = Camera::default();
        for (i, target) in [[1.2, 0.8], [-0.9, 1.1], [0.3, -1.4], [1.9, 0.1]]
            .into_iter()
            .enumerate()
        {
            let scenario = Scenario {
                id: i as u64,
                cube: [0.5, 0.5],
                target,
            };
            let frame = goal_frame(&camera, &scenario);
            let ee = &frame.keypoints[KP_EE];
            let cube = &frame.keypoints[KP_CUBE];
            let goal = &frame.keypoints[KP_TARGET];
            assert!((ee.x - goal.x).abs() < 1e-9 && (ee.y - goal.y).abs() < 1e-9);
            assert!((cube.x - goal.x).abs() < 1e-9 && (cube.y - goal.y).abs() < 1e-9);
        }
    }

    #[test]
    fn goal_pose_stays_on_the_expert_branch() {
        let scenario = Scenario {
            id: 0,
            cube: [0.5, 0.5],
            target: [1.0, 1.0],
        };
        let [tx, ty] = scenario.target;
        let r2 = tx * tx + ty * ty;
        let c2 = (r2 - 2.0) / 2.0;
        let q2 = -c2.acos();
        let q1 = ty.atan2(tx) - (q2.sin()).atan2(1.0 + c2);
        let ee = ee_pos(&[q1, q2]);
        assert!((ee[0] - tx).abs() < 1e-12 && (ee[1] - ty).abs() < 1e-12);
        assert!(q2 < 0.0, "elbow branch matches the start pose");
    }
}
