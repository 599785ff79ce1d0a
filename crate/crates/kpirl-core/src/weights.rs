//! Single-file tensor checkpoints.
//!
//! Layout: a little-endian u32 manifest length, the JSON manifest (caller
//! metadata plus the tensor shapes), then one length-prefixed block of
//! little-endian f64 values per tensor. Every value written comes back
//! bit-exact; anything structurally off reads back as a format error.

use std::fs;
use std::path::Path;

use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::autodiff::Tensor;
use crate::dynamics::{DynModel, NormStats};
use crate::error::{Error, Result};
use crate::mlp::{Activation, MlpParams};
use crate::types::StateLayout;

#[derive(Serialize)]
struct ManifestOut<'a, M: Serialize> {
    meta: &'a M,
    shapes: Vec<[usize; 2]>,
}

#[derive(Deserialize)]
struct ManifestIn<M> {
    meta: M,
    shapes: Vec<[usize; 2]>,
}

pub fn save_tensor_file<M: Serialize>(path: &Path, meta: &M, tensors: &[&Tensor]) -> Result<()> {
    let manifest = serde_json::to_vec(&ManifestOut {
        meta,
        shapes: tensors.iter().map(|t| [t.rows(), t.cols()]).collect(),
    })
    .map_err(|e| Error::Format(format!("manifest serialization: {e}")))?;
    if manifest.len() > u32::MAX as usize {
        return Err(Error::Format("manifest exceeds u32 length".into()));
    }
    let payload: usize = tensors.iter().map(|t| 8 + 8 * t.len()).sum();
    let mut buf = Vec::with_capacity(4 + manifest.len() + payload);
    buf.extend_from_slice(&(manifest.len() as u32).to_le_bytes());
    buf.extend_from_slice(&manifest);
    for t in tensors {
        buf.extend_from_slice(&(t.len() as u64).to_le_bytes());
        for v in t.data() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    fs::write(path, buf)?;
    Ok(())
}

fn take<'a>(bytes: &'a [u8], pos: &mut usize, n: usize) -> Result<&'a [u8]> {
    let end = pos
        .checked_add(n)
        .filter(|&e| e <= bytes.len())
        .ok_or_else(|| Error::Format("checkpoint truncated".into()))?;
    let s = &bytes[*pos..end];
    *pos = end;
    Ok(s)
}

pub fn load_tensor_file<M: DeserializeOwned>(path: &Path) -> Result<(M, Vec<Tensor>)> {
    let bytes = fs::read(path)?;
    let mut pos = 0usize;

    let len_bytes = take(&bytes, &mut pos, 4)?;
    let manifest_len = u32::from_le_bytes(len_bytes.try_into().unwrap()) as usize;
    let manifest_bytes = take(&bytes, &mut pos, manifest_len)?;
    let manifest: ManifestIn<M> = serde_json::from_slice(manifest_bytes)
        .map_err(|e| Error::Format(format!("checkpoint manifest: {e}")))?;

    let mut tensors = Vec::with_capacity(manifest.shapes.len());
    for (i, [rows, cols]) in manifest.shapes.iter().copied().enumerate() {
        let count_bytes = take(&bytes, &mut pos, 8)?;
        let count = u64::from_le_bytes(count_bytes.try_into().unwrap()) as usize;
        if count != rows * cols {
            return Err(Error::Format(format!(
                "tensor {i}: payload holds {count} values but manifest shape is {rows}x{cols}"
            )));
        }
        let raw = take(&bytes, &mut pos, 8 * count)?;
        let data: Vec<f64> = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Format(format!("tensor {i}: non-finite value")));
        }
        tensors.push(Tensor::new(rows, cols, data)?);
    }
    if pos != bytes.len() {
        return Err(Error::Format(format!(
            "{} trailing bytes after payload",
            bytes.len() - pos
        )));
    }
    Ok((manifest.meta, tensors))
}

/// Provenance carried by every checkpoint: which configuration produced
/// it, under which seed, and how far training had progressed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunStamp {
    pub config_hash: String,
    pub seed: u64,
    pub iteration: u64,
}

#[derive(Serialize, Deserialize)]
struct DynModelMeta {
    kind: String,
    sizes: Vec<usize>,
    activation: Activation,
    num_keypoints: usize,
    dof: usize,
    action_dim: usize,
    input_norm: NormStats,
    delta_norm: NormStats,
    stamp: RunStamp,
}

pub fn save_dyn_model(path: &Path, model: &DynModel, stamp: &RunStamp) -> Result<()> {
    let meta = DynModelMeta {
        kind: "dynamics".into(),
        sizes: model.mlp.sizes.clone(),
        activation: model.mlp.activation,
        num_keypoints: model.layout.num_keypoints,
        dof: model.layout.dof,
        action_dim: model.action_dim,
        input_norm: model.input_norm.clone(),
        delta_norm: model.delta_norm.clone(),
        stamp: stamp.clone(),
    };
    save_tensor_file(path, &meta, &model.mlp.tensors())
}

pub fn load_dyn_model(path: &Path) -> Result<(DynModel, RunStamp)> {
    let (meta, tensors) = load_tensor_file::<DynModelMeta>(path)?;
    if meta.kind != "dynamics" {
        return Err(Error::Format(format!(
            "expected a dynamics checkpoint, found kind {:?}",
            meta.kind
        )));
    }
    let layout = StateLayout::new(meta.num_keypoints, meta.dof);
    let state_dim = layout.dim();
    if meta.input_norm.dim() != state_dim + meta.action_dim || meta.delta_norm.dim() != state_dim {
        return Err(Error::Format("normalization stats have wrong width".into()));
    }
    let mlp = MlpParams::from_parts(meta.sizes, meta.activation, tensors)?;
    if mlp.input_dim() != state_dim + meta.action_dim || mlp.output_dim() != state_dim {
        return Err(Error::Format("network width does not match state layout".into()));
    }
    Ok((
        DynModel {
            mlp,
            layout,
            action_dim: meta.action_dim,
            input_norm: meta.input_norm,
            delta_norm: meta.delta_norm,
        },
        meta.stamp,
    ))
}
