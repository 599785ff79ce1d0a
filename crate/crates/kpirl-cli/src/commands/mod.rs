//! Subcommand implementations. Each gets the resolved configuration plus
//! its hash through [`Ctx`] so every output carries the same provenance.

pub mod collect;
pub mod eval;
pub mod plot_export;
pub mod train_airl;
pub mod train_dynamics;
pub mod train_irl;

use std::path::Path;

use kpirl_core::weights::RunStamp;

use crate::config::{RunConfig, SCALE_NOTE};
use crate::error::{at_path, AppResult};
use crate::files::DatasetHeader;

pub struct Ctx {
    pub cfg: RunConfig,
    /// Hash of the effective configuration, stamped into every output.
    pub hash: String,
    pub overwrite: bool,
}

impl Ctx {
    pub fn new(cfg: RunConfig, overwrite: bool) -> Self {
        let hash = cfg.hash();
        Ctx {
            cfg,
            hash,
            overwrite,
        }
    }

    fn header(&self, kind: &str, count: usize) -> DatasetHeader {
        DatasetHeader {
            kind: kind.into(),
            config_hash: self.hash.clone(),
            seed: self.cfg.seed,
            count,
            note: SCALE_NOTE.into(),
        }
    }

    fn stamp(&self, iteration: u64) -> RunStamp {
        RunStamp {
            config_hash: self.hash.clone(),
            seed: self.cfg.seed,
            iteration,
        }
    }

    fn prepare_out_dir(&self) -> AppResult<()> {
        std::fs::create_dir_all(&self.cfg.out_dir).map_err(|e| at_path(&self.cfg.out_dir, e))
    }

    /// Flags inputs produced under a different configuration. Not fatal:
    /// downstream settings legitimately change between stages, but the
    /// mismatch should be visible when results look odd.
    fn note_provenance(&self, path: &Path, file_hash: &str) {
        if file_hash != self.hash {
            eprintln!(
                "note: {} comes from config {file_hash}, this run is {}",
                path.display(),
                self.hash
            );
        }
    }
}
