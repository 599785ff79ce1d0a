//! Persistence for the three adversarial networks as one bundle.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::mlp::{Activation, MlpParams};
use crate::weights::{load_tensor_file, save_tensor_file, RunStamp};

use super::nets::{Discriminator, PolicyNet, ValueFn};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct NetSpec {
    sizes: Vec<usize>,
    activation: Activation,
}

impl NetSpec {
    fn of(mlp: &MlpParams) -> NetSpec {
        NetSpec {
            sizes: mlp.sizes.clone(),
            activation: mlp.activation,
        }
    }

    fn tensor_count(&self) -> usize {
        2 * self.sizes.len().saturating_sub(1)
    }

    fn rebuild(&self, tensors: Vec<Tensor>) -> Result<MlpParams> {
        MlpParams::from_parts(self.sizes.clone(), self.activation, tensors)
    }
}

#[derive(Serialize, Deserialize)]
struct AirlMeta {
    kind: String,
    action_dim: usize,
    discriminator: NetSpec,
    value: NetSpec,
    policy: NetSpec,
    action_low: f64,
    action_high: f64,
    stamp: RunStamp,
}

const AIRL_KIND: &str = "airl";

pub fn save_airl(
    path: &Path,
    pi: &PolicyNet,
    d: &Discriminator,
    v: &ValueFn,
    stamp: &RunStamp,
) -> Result<()> {
    let meta = AirlMeta {
        kind: AIRL_KIND.into(),
        action_dim: d.action_dim,
        discriminator: NetSpec::of(&d.mlp),
        value: NetSpec::of(&v.mlp),
        policy: NetSpec::of(&pi.mlp),
        action_low: pi.action_low,
        action_high: pi.action_high,
        stamp: stamp.clone(),
    };
    let mut tensors = d.mlp.tensors();
    tensors.extend(v.mlp.tensors());
    tensors.extend(pi.mlp.tensors());
    save_tensor_file(path, &meta, &tensors)
}

pub fn load_airl(path: &Path) -> Result<(PolicyNet, Discriminator, ValueFn, RunStamp)> {
    let (meta, mut tensors): (AirlMeta, Vec<Tensor>) = load_tensor_file(path)?;
    if meta.kind != AIRL_KIND {
        return Err(Error::Format(format!(
            "expected an {AIRL_KIND} checkpoint, found {:?}",
            meta.kind
        )));
    }
    let nd = meta.discriminator.tensor_count();
    let nv = meta.value.tensor_count();
    let np = meta.policy.tensor_count();
    if tensors.len() != nd + nv + np {
        return Err(Error::Format(format!(
            "adversarial checkpoint holds {} tensors, expected {}",
            tensors.len(),
            nd + nv + np
        )));
    }
    let policy_tensors = tensors.split_off(nd + nv);
    let value_tensors = tensors.split_off(nd);

    let d = Discriminator {
        mlp: meta.discriminator.rebuild(tensors)?,
        action_dim: meta.action_dim,
    };
    if meta.action_dim >= d.mlp.input_dim() {
        return Err(Error::Format(format!(
            "action width {} does not fit a {}-wide discriminator input",
            meta.action_dim,
            d.mlp.input_dim()
        )));
    }
    let v = ValueFn {
        mlp: meta.value.rebuild(value_tensors)?,
    };
    if !(meta.action_low < meta.action_high) {
        return Err(Error::Format(format!(
            "stored action bounds [{}, {}] are not ordered",
            meta.action_low, meta.action_high
        )));
    }
    let pi = PolicyNet {
        mlp: meta.policy.rebuild(policy_tensors)?,
        action_low: meta.action_low,
        action_high: meta.action_high,
    };
    Ok((pi, d, v, meta.stamp))
}
