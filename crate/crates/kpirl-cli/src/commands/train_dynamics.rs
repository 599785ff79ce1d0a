//! Fits the residual keypoint dynamics model and records its learning
//! curve.

use kpirl_core::types::Transition;
use kpirl_core::dynamics::train_dynamics;
use kpirl_core::weights::save_dyn_model;

use super::Ctx;
use crate::error::{at_path, AppResult};
use crate::files::{guard_outputs, read_jsonl, write_curve_csv, CurveRecord};

pub fn run(ctx: &Ctx) -> AppResult<()> {
    let cfg = &ctx.cfg;
    let data_path = cfg.path(&cfg.paths.dyn_data);
    let model_path = cfg.path(&cfg.paths.dyn_model);
    let curve_path = cfg.path(&cfg.paths.dyn_curve);
    guard_outputs(&[&model_path, &curve_path], ctx.overwrite)?;
    ctx.prepare_out_dir()?;

    let (header, transitions): (_, Vec<Transition>) = read_jsonl(&data_path, "transitions")?;
    ctx.note_provenance(&data_path, &header.config_hash);

    let (model, report) = train_dynamics(&transitions, &cfg.dynamics)?;
    save_dyn_model(
        &model_path,
        &model,
        &ctx.stamp(cfg.dynamics.epochs as u64),
    )
    .map_err(|e| at_path(&model_path, e))?;

    let rows: Vec<CurveRecord> = report
        .train_mse
        .iter()
        .zip(&report.val_mse)
        .enumerate()
        .map(|(epoch, (train, val))| CurveRecord {
            iteration: epoch as u64,
            values: vec![*train, *val],
        })
        .collect();
    write_curve_csv(
        &curve_path,
        &ctx.hash,
        cfg.seed,
        crate::config::SCALE_NOTE,
        &["train_mse", "val_mse"],
        &rows,
    )?;

    println!(
        "dynamics model fit on {} transitions over {} epochs",
        transitions.len(),
        report.train_mse.len(),
    );
    if let (Some(train), Some(val)) = (report.train_mse.last(), report.val_mse.last()) {
        println!("final mse: train {train:.3e}, validation {val:.3e}");
    }
    Ok(())
}
