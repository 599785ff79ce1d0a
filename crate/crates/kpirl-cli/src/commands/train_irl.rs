//! Learns a trajectory cost from the collected demonstrations, either by
//! descending the imitation loss through the planner or with the classic
//! feature-matching baseline. Supports resuming an interrupted run from
//! its saved optimizer state.

use clap::ValueEnum;
use kpirl_core::irl::{
    feature_matching_baseline, load_irl_state, make_relative, save_cost, save_irl_state,
    train_irl_steps, CostVariant, IrlState,
};
use kpirl_core::types::Demonstration;
use kpirl_core::weights::load_dyn_model;
use kpirl_core::{Error, Result};

use super::Ctx;
use crate::config::SCALE_NOTE;
use crate::error::{at_path, AppResult};
use crate::files::{
    append_curve_rows, guard_outputs, read_jsonl, write_curve_csv, CurveRecord,
};

/// Cost family flag, matching the config file spelling exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VariantArg {
    Weighted,
    Timeweighted,
    Rbf,
}

impl From<VariantArg> for CostVariant {
    fn from(v: VariantArg) -> CostVariant {
        match v {
            VariantArg::Weighted => CostVariant::Weighted,
            VariantArg::Timeweighted => CostVariant::TimeWeighted,
            VariantArg::Rbf => CostVariant::Rbf,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BaselineArg {
    FeatureMatching,
}

pub fn run(ctx: &Ctx, baseline: Option<BaselineArg>, resume: bool) -> AppResult<()> {
    let cfg = &ctx.cfg;
    let demos_path = cfg.path(&cfg.paths.demos);
    let model_path = cfg.path(&cfg.paths.dyn_model);

    let (header, demos): (_, Vec<Demonstration>) = read_jsonl(&demos_path, "demos")?;
    ctx.note_provenance(&demos_path, &header.config_hash);
    let demos = prepare_demos(demos, cfg.irl.relative_demos)?;

    let (model, model_stamp) = load_dyn_model(&model_path).map_err(|e| at_path(&model_path, e))?;
    ctx.note_provenance(&model_path, &model_stamp.config_hash);

    if let Some(BaselineArg::FeatureMatching) = baseline {
        let cost_path = cfg.path(&cfg.paths.fm_cost);
        let curve_path = cfg.path(&cfg.paths.fm_curve);
        guard_outputs(&[&cost_path, &curve_path], ctx.overwrite)?;
        ctx.prepare_out_dir()?;

        let (params, losses) = feature_matching_baseline(&demos, &model, &cfg.irl)?;
        let iterations = losses.len() as u64;
        save_cost(&cost_path, &params, &ctx.stamp(iterations))
            .map_err(|e| at_path(&cost_path, e))?;
        write_curve_csv(
            &curve_path,
            &ctx.hash,
            cfg.seed,
            SCALE_NOTE,
            &["loss"],
            &loss_rows(0, &losses),
        )?;
        report("feature matching", &losses);
        return Ok(());
    }

    let cost_path = cfg.path(&cfg.paths.cost);
    let state_path = cfg.path(&cfg.paths.irl_state);
    let curve_path = cfg.path(&cfg.paths.irl_curve);

    if resume {
        let (mut state, stamp) =
            load_irl_state(&state_path).map_err(|e| at_path(&state_path, e))?;
        ctx.note_provenance(&state_path, &stamp.config_hash);
        let total = cfg.irl.iterations as u64;
        if state.next_iteration >= total {
            println!(
                "nothing to resume: {} of {total} iterations already done",
                state.next_iteration
            );
            return Ok(());
        }
        let start = state.next_iteration;
        let remaining = (total - start) as usize;
        let losses = train_irl_steps(&mut state, &demos, &model, &cfg.irl, remaining)?;
        append_curve_rows(&curve_path, &loss_rows(start, &losses))?;
        save_checkpoints(ctx, &state, &cost_path, &state_path)?;
        println!("resumed at iteration {start}");
        report("cost training", &losses);
        return Ok(());
    }

    guard_outputs(&[&cost_path, &state_path, &curve_path], ctx.overwrite)?;
    ctx.prepare_out_dir()?;

    let mut state = IrlState::init(&demos, &cfg.irl)?;
    let losses = train_irl_steps(&mut state, &demos, &model, &cfg.irl, cfg.irl.iterations)?;
    write_curve_csv(
        &curve_path,
        &ctx.hash,
        cfg.seed,
        SCALE_NOTE,
        &["loss"],
        &loss_rows(0, &losses),
    )?;
    save_checkpoints(ctx, &state, &cost_path, &state_path)?;
    report("cost training", &losses);
    Ok(())
}

/// Re-expresses demos relative to their own first frame when configured.
/// For self-collected demos the robot start is that first frame, so this
/// shifts goals without changing the imitation problem.
fn prepare_demos(demos: Vec<Demonstration>, relative: bool) -> Result<Vec<Demonstration>> {
    if !relative {
        return Ok(demos);
    }
    demos
        .iter()
        .map(|d| match d.frames.first() {
            Some(start) => make_relative(d, start),
            None => Err(Error::InvalidInput("demo has no frames".into())),
        })
        .collect()
}

fn loss_rows(start: u64, losses: &[f64]) -> Vec<CurveRecord> {
    losses
        .iter()
        .enumerate()
        .map(|(i, loss)| CurveRecord {
            iteration: start + i as u64,
            values: vec![*loss],
        })
        .collect()
}

fn save_checkpoints(
    ctx: &Ctx,
    state: &IrlState,
    cost_path: &std::path::Path,
    state_path: &std::path::Path,
) -> AppResult<()> {
    let stamp = ctx.stamp(state.next_iteration);
    save_cost(cost_path, &state.best_params, &stamp).map_err(|e| at_path(cost_path, e))?;
    save_irl_state(state_path, state, &stamp).map_err(|e| at_path(state_path, e))
}

fn report(label: &str, losses: &[f64]) {
    match (losses.first(), losses.last()) {
        (Some(first), Some(last)) => {
            println!("{label}: {} iterations, loss {first:.4} -> {last:.4}", losses.len())
        }
        _ => println!("{label}: no iterations run"),
    }
}
