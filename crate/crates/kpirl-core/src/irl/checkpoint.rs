//! Persistence for learned costs and interruptible training runs.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::mlp::{Activation, MlpParams};
use crate::weights::{load_tensor_file, save_tensor_file, RunStamp};

use super::cost::{CostParams, CostVariant};
use super::train::IrlState;

/// Structural description of a cost checkpoint, enough to rebuild the
/// parameter tensors and reject files from a different setup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostSpec {
    pub variant: CostVariant,
    pub num_keypoints: usize,
    /// Time-weight count; zero unless the variant carries per-step weights.
    pub time_steps: usize,
    /// Network layer sizes; empty unless the variant is a network.
    pub sizes: Vec<usize>,
    pub activation: Option<Activation>,
}

impl CostSpec {
    pub fn of(params: &CostParams) -> CostSpec {
        match params {
            CostParams::Weighted { raw_x, .. } => CostSpec {
                variant: CostVariant::Weighted,
                num_keypoints: raw_x.cols(),
                time_steps: 0,
                sizes: vec![],
                activation: None,
            },
            CostParams::TimeWeighted {
                raw_x, raw_time, ..
            } => CostSpec {
                variant: CostVariant::TimeWeighted,
                num_keypoints: raw_x.cols(),
                time_steps: raw_time.cols(),
                sizes: vec![],
                activation: None,
            },
            CostParams::Rbf { mlp } => CostSpec {
                variant: CostVariant::Rbf,
                num_keypoints: mlp.input_dim() / 4,
                time_steps: 0,
                sizes: mlp.sizes.clone(),
                activation: Some(mlp.activation),
            },
        }
    }

    pub fn tensor_count(&self) -> usize {
        match self.variant {
            CostVariant::Weighted => 2,
            CostVariant::TimeWeighted => 3,
            CostVariant::Rbf => 2 * self.sizes.len().saturating_sub(1),
        }
    }

    fn expect_row(&self, t: &Tensor, cols: usize, what: &'static str) -> Result<()> {
        if t.shape() != (1, cols) {
            return Err(Error::shape(what, format!("1x{cols}"), t.shape_str()));
        }
        Ok(())
    }

    pub fn rebuild(&self, mut tensors: Vec<Tensor>) -> Result<CostParams> {
        if tensors.len() != self.tensor_count() {
            return Err(Error::Format(format!(
                "cost checkpoint holds {} tensors, expected {}",
                tensors.len(),
                self.tensor_count()
            )));
        }
        match self.variant {
            CostVariant::Weighted => {
                let raw_y = tensors.pop().unwrap();
                let raw_x = tensors.pop().unwrap();
                self.expect_row(&raw_x, self.num_keypoints, "stored x weights")?;
                self.expect_row(&raw_y, self.num_keypoints, "stored y weights")?;
                Ok(CostParams::Weighted { raw_x, raw_y })
            }
            CostVariant::TimeWeighted => {
                let raw_time = tensors.pop().unwrap();
                let raw_y = tensors.pop().unwrap();
                let raw_x = tensors.pop().unwrap();
                self.expect_row(&raw_x, self.num_keypoints, "stored x weights")?;
                self.expect_row(&raw_y, self.num_keypoints, "stored y weights")?;
                self.expect_row(&raw_time, self.time_steps, "stored time weights")?;
                Ok(CostParams::TimeWeighted {
                    raw_x,
                    raw_y,
                    raw_time,
                })
            }
            CostVariant::Rbf => {
                let activation = self.activation.ok_or_else(|| {
                    Error::Format("network cost checkpoint lacks an activation".into())
                })?;
                if self.sizes.first() != Some(&(4 * self.num_keypoints)) {
                    return Err(Error::Format(format!(
                        "network input width {:?} does not fit {} keypoints",
                        self.sizes.first(),
                        self.num_keypoints
                    )));
                }
                Ok(CostParams::Rbf {
                    mlp: MlpParams::from_parts(self.sizes.clone(), activation, tensors)?,
                })
            }
        }
    }
}

#[derive(Serialize, Deserialize)]
struct CostMeta {
    kind: String,
    spec: CostSpec,
    stamp: RunStamp,
}

#[derive(Serialize, Deserialize)]
struct IrlStateMeta {
    kind: String,
    spec: CostSpec,
    best_loss: Option<f64>,
    next_iteration: u64,
    stamp: RunStamp,
}

const COST_KIND: &str = "cost";
const STATE_KIND: &str = "irl-state";

pub fn save_cost(path: &Path, params: &CostParams, stamp: &RunStamp) -> Result<()> {
    let meta = CostMeta {
        kind: COST_KIND.into(),
        spec: CostSpec::of(params),
        stamp: stamp.clone(),
    };
    save_tensor_file(path, &meta, &params.tensors())
}

pub fn load_cost(path: &Path) -> Result<(CostParams, RunStamp)> {
    let (meta, tensors): (CostMeta, Vec<Tensor>) = load_tensor_file(path)?;
    if meta.kind != COST_KIND {
        return Err(Error::Format(format!(
            "expected a {COST_KIND} checkpoint, found {:?}",
            meta.kind
        )));
    }
    Ok((meta.spec.rebuild(tensors)?, meta.stamp))
}

/// Saves an in-flight training run: current parameters followed by the
/// best parameters, plus the loss and iteration bookkeeping.
pub fn save_irl_state(path: &Path, state: &IrlState, stamp: &RunStamp) -> Result<()> {
    let spec = CostSpec::of(&state.params);
    if CostSpec::of(&state.best_params) != spec {
        return Err(Error::InvalidInput(
            "current and best parameters disagree on structure".into(),
        ));
    }
    let meta = IrlStateMeta {
        kind: STATE_KIND.into(),
        spec,
        best_loss: state.best_loss,
        next_iteration: state.next_iteration,
        stamp: stamp.clone(),
    };
    let mut tensors = state.params.tensors();
    tensors.extend(state.best_params.tensors());
    save_tensor_file(path, &meta, &tensors)
}

pub fn load_irl_state(path: &Path) -> Result<(IrlState, RunStamp)> {
    let (meta, mut tensors): (IrlStateMeta, Vec<Tensor>) = load_tensor_file(path)?;
    if meta.kind != STATE_KIND {
        return Err(Error::Format(format!(
            "expected an {STATE_KIND} checkpoint, found {:?}",
            meta.kind
        )));
    }
    let n = meta.spec.tensor_count();
    if tensors.len() != 2 * n {
        return Err(Error::Format(format!(
            "training checkpoint holds {} tensors, expected {}",
            tensors.len(),
            2 * n
        )));
    }
    let best = tensors.split_off(n);
    Ok((
        IrlState {
            params: meta.spec.rebuild(tensors)?,
            best_params: meta.spec.rebuild(best)?,
            best_loss: meta.best_loss,
            next_iteration: meta.next_iteration,
        },
        meta.stamp,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use tempfile::tempdir;

    fn stamp() -> RunStamp {
        RunStamp {
            config_hash: "cafe0123".into(),
            seed: 7,
            iteration: 42,
        }
    }

    fn sample(variant: CostVariant) -> CostParams {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let mut p = CostParams::init(variant, 4, 5, &[8], &mut rng).unwrap();
        for t in p.tensors_mut() {
            for (i, v) in t.data_mut().iter_mut().enumerate() {
                *v += 0.01 * i as f64 - 0.3;
            }
        }
        p
    }

    #[test]
    fn cost_round_trips_bit_exactly() {
        let dir = tempdir().unwrap();
        for variant in [CostVariant::Weighted, CostVariant::TimeWeighted, CostVariant::Rbf] {
            let params = sample(variant);
            let path = dir.path().join(format!("{variant:?}.bin"));
            save_cost(&path, &params, &stamp()).unwrap();
            let (loaded, st) = load_cost(&path).unwrap();
            assert_eq!(loaded, params);
            assert_eq!(st.config_hash, "cafe0123");
        }
    }

    #[test]
    fn training_state_round_trips() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("state.bin");
        let mut state = IrlState {
            params: sample(CostVariant::TimeWeighted),
            best_params: sample(CostVariant::TimeWeighted),
            best_loss: Some(0.25),
            next_iteration: 99,
        };
        state.best_params.tensors_mut()[0].data_mut()[0] = 123.456;
        save_irl_state(&path, &state, &stamp()).unwrap();
        let (loaded, _) = load_irl_state(&path).unwrap();
        assert_eq!(loaded, state);
    }

    #[test]
    fn fresh_state_with_no_best_loss_round_trips() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("fresh.bin");
        let params = sample(CostVariant::Rbf);
        let state = IrlState {
            best_params: params.clone(),
            params,
            best_loss: None,
            next_iteration: 0,
        };
        save_irl_state(&path, &state, &stamp()).unwrap();
        let (loaded, _) = load_irl_state(&path).unwrap();
        assert_eq!(loaded.best_loss, None);
        assert_eq!(loaded.next_iteration, 0);
    }

    #[test]
    fn kind_confusion_is_rejected() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("cost.bin");
        save_cost(&path, &sample(CostVariant::Weighted), &stamp()).unwrap();
        assert!(load_irl_state(&path).is_err());
    }
}
