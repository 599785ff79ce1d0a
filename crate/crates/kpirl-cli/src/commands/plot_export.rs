//! Melts one or more curve CSVs into a single long-format table that
//! plotting tools can facet by run label and metric name.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use super::Ctx;
use crate::error::{at_path, AppResult};
use crate::files::{guard_outputs, read_curve_csv};

pub fn run(ctx: &Ctx, inputs: &[PathBuf]) -> AppResult<()> {
    let out_path = ctx.cfg.path(&ctx.cfg.paths.plot_export);
    guard_outputs(&[&out_path], ctx.overwrite)?;
    ctx.prepare_out_dir()?;

    let file = File::create(&out_path).map_err(|e| at_path(&out_path, e))?;
    let mut out = BufWriter::new(file);
    let io = |e: std::io::Error| at_path(&out_path, e);
    writeln!(
        out,
        "# config_hash={} seed={} note=merged curves",
        ctx.hash, ctx.cfg.seed
    )
    .map_err(io)?;
    writeln!(out, "label,iteration,metric,value").map_err(io)?;

    let mut rows = 0usize;
    for input in inputs {
        let curve = read_curve_csv(input)?;
        let label = match input.file_stem() {
            Some(stem) => stem.to_string_lossy().into_owned(),
            None => input.display().to_string(),
        };
        for row in &curve.rows {
            for (metric, value) in curve.columns.iter().zip(&row.values) {
                writeln!(out, "{label},{},{metric},{value}", row.iteration).map_err(io)?;
                rows += 1;
            }
        }
    }
    out.flush().map_err(io)?;

    println!(
        "merged {} curve files into {} ({rows} rows)",
        inputs.len(),
        out_path.display(),
    );
    Ok(())
}
