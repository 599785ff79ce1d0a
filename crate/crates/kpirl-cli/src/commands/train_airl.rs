//! Adversarial training: discriminator reward, TD value function, and a
//! planner-guided policy, all from the expert transition dataset.

use kpirl_core::airl::{airl_train, save_airl};
use kpirl_core::types::Transition;
use kpirl_core::weights::load_dyn_model;

use super::Ctx;
use crate::config::SCALE_NOTE;
use crate::error::{at_path, AppResult};
use crate::files::{guard_outputs, read_jsonl, write_curve_csv, CurveRecord};

pub fn run(ctx: &Ctx) -> AppResult<()> {
    let cfg = &ctx.cfg;
    let expert_path = cfg.path(&cfg.paths.expert_transitions);
    let model_path = cfg.path(&cfg.paths.dyn_model);
    let airl_path = cfg.path(&cfg.paths.airl);
    let curve_path = cfg.path(&cfg.paths.airl_curve);
    guard_outputs(&[&airl_path, &curve_path], ctx.overwrite)?;
    ctx.prepare_out_dir()?;

    let (header, expert): (_, Vec<Transition>) =
        read_jsonl(&expert_path, "expert-transitions")?;
    ctx.note_provenance(&expert_path, &header.config_hash);
    let (model, model_stamp) = load_dyn_model(&model_path).map_err(|e| at_path(&model_path, e))?;
    ctx.note_provenance(&model_path, &model_stamp.config_hash);

    let run = airl_train(&expert, &model, &cfg.airl)?;

    let iterations = run.disc_loss.len();
    save_airl(
        &airl_path,
        &run.policy,
        &run.discriminator,
        &run.value,
        &ctx.stamp(iterations as u64),
    )
    .map_err(|e| at_path(&airl_path, e))?;

    let rows: Vec<CurveRecord> = (0..iterations)
        .map(|i| CurveRecord {
            iteration: i as u64,
            values: vec![
                run.disc_loss[i],
                run.mean_episode_reward[i],
                run.mean_abs_td[i],
            ],
        })
        .collect();
    write_curve_csv(
        &curve_path,
        &ctx.hash,
        cfg.seed,
        SCALE_NOTE,
        &["disc_loss", "mean_episode_reward", "mean_abs_td"],
        &rows,
    )?;

    println!(
        "adversarial training: {iterations} iterations on {} expert transitions",
        expert.len(),
    );
    if let (Some(d), Some(r)) = (run.disc_loss.last(), run.mean_episode_reward.last()) {
        println!("final discriminator loss {d:.4}, mean episode reward {r:.4}");
    }
    Ok(())
}
