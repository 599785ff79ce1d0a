//! Runs the scripted expert and the exploration policy, writing the demo
//! and dynamics datasets everything downstream trains on.

use kpirl_core::world::{collect_demos, collect_dyn_data, Camera};

use super::Ctx;
use crate::error::AppResult;
use crate::files::{guard_outputs, write_jsonl};

pub fn run(ctx: &Ctx) -> AppResult<()> {
    let cfg = &ctx.cfg;
    let demos_path = cfg.path(&cfg.paths.demos);
    let expert_path = cfg.path(&cfg.paths.expert_transitions);
    let dyn_path = cfg.path(&cfg.paths.dyn_data);
    guard_outputs(&[&demos_path, &expert_path, &dyn_path], ctx.overwrite)?;
    ctx.prepare_out_dir()?;

    let camera = Camera::default();
    let demos = collect_demos(cfg.demo_count, cfg.seed, &camera)?;
    // The exploration stream gets a derived seed so the two datasets stay
    // decoupled while still being pinned by the one run seed.
    let dyn_data = collect_dyn_data(
        cfg.dyn_transitions,
        cfg.dyn_expert_mix,
        cfg.seed.wrapping_add(1),
        &camera,
    )?;

    write_jsonl(
        &demos_path,
        &ctx.header("demos", demos.demos.len()),
        &demos.demos,
    )?;
    write_jsonl(
        &expert_path,
        &ctx.header("expert-transitions", demos.expert_transitions.len()),
        &demos.expert_transitions,
    )?;
    write_jsonl(
        &dyn_path,
        &ctx.header("transitions", dyn_data.transitions.len()),
        &dyn_data.transitions,
    )?;

    println!(
        "collected {} demos ({} scenarios re-drawn), {} expert transitions",
        demos.demos.len(),
        demos.resampled,
        demos.expert_transitions.len(),
    );
    println!(
        "collected {} dynamics transitions ({:.0}% from expert replays)",
        dyn_data.transitions.len(),
        100.0 * dyn_data.expert_fraction(),
    );
    Ok(())
}
