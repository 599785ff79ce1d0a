//! Residual keypoint-space dynamics model.
//!
//! The network predicts the state change: `next = state + denorm(mlp(norm([state, action])))`,
//! with keypoint intensities clamped back into [0, 1]. Freshly initialized
//! models carry identity normalization and a zeroed final layer, so they
//! start as the exact identity map; training fits the normalization to the
//! data and the network to the residuals.

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{DualValue, Tape, Tensor};
use crate::error::{Error, Result};
use crate::mlp::{Activation, MlpParams};
use crate::types::StateLayout;

/// Per-feature affine normalization, stored as plain vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl NormStats {
    pub fn identity(dim: usize) -> Self {
        NormStats {
            mean: vec![0.0; dim],
            std: vec![1.0; dim],
        }
    }

    /// Column-wise mean and standard deviation, with a floor keeping the
    /// scale strictly positive for constant features.
    pub fn fit(data: &Tensor) -> Self {
        let (n, d) = data.shape();
        let mut mean = vec![0.0; d];
        for r in 0..n {
            for c in 0..d {
                mean[c] += data.get(r, c);
            }
        }
        for m in &mut mean {
            *m /= n.max(1) as f64;
        }
        let mut var = vec![0.0; d];
        for r in 0..n {
            for c in 0..d {
                let dv = data.get(r, c) - mean[c];
                var[c] += dv * dv;
            }
        }
        let std = var
            .iter()
            .map(|v| (v / n.max(1) as f64).sqrt().max(1e-8))
            .collect();
        NormStats { mean, std }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// Dynamics model parameters: the MLP stack plus normalization and the
/// state layout it was built for.
#[derive(Debug, Clone, PartialEq)]
pub struct DynModel {
    pub mlp: MlpParams,
    pub layout: StateLayout,
    pub action_dim: usize,
    pub input_norm: NormStats,
    pub delta_norm: NormStats,
}

impl DynModel {
    /// Fresh model: identity normalization, zeroed output layer. Hidden
    /// sizes come from `hidden`; input is state + action, output is the
    /// state delta.
    pub fn init(
        layout: StateLayout,
        action_dim: usize,
        hidden: &[usize],
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        let state_dim = layout.dim();
        let mut sizes = vec![state_dim + action_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(state_dim);
        let mut mlp = MlpParams::init(&sizes, Activation::Tanh, rng)?;
        mlp.zero_final_layer();
        Ok(DynModel {
            mlp,
            layout,
            action_dim,
            input_norm: NormStats::identity(state_dim + action_dim),
            delta_norm: NormStats::identity(state_dim),
        })
    }

    pub fn state_dim(&self) -> usize {
        self.layout.dim()
    }

    /// Records one prediction step. `state` is a batch of state rows,
    /// `action` the matching batch of action rows; parameter nodes are
    /// supplied by the caller so training can make them differentiation
    /// roots while planning treats them as constants.
    pub fn predict_rec(
        &self,
        tape: &mut Tape,
        state: &DualValue,
        action: &DualValue,
        params: &crate::mlp::MlpParamNodes,
    ) -> Result<DualValue> {
        self.check_shapes(state.value().shape(), action.value().shape())?;
        let joint = tape.concat_cols(&[state, action])?;
        let centered = tape.sub(&joint, &DualValue::constant(Tensor::row(self.input_norm.mean.clone())))?;
        let inv_std: Vec<f64> = self.input_norm.std.iter().map(|s| 1.0 / s).collect();
        let normed = tape.mul(&centered, &DualValue::constant(Tensor::row(inv_std)))?;
        let raw_delta = self.mlp.forward_rec(tape, &normed, params)?;
        let scaled = tape.mul(
            &raw_delta,
            &DualValue::constant(Tensor::row(self.delta_norm.std.clone())),
        )?;
        let delta = tape.add(
            &scaled,
            &DualValue::constant(Tensor::row(self.delta_norm.mean.clone())),
        )?;
        let next = tape.add(state, &delta)?;
        self.clamp_intensities_rec(tape, &next)
    }

    /// Rebuilds the state row with intensity channels clamped to [0, 1].
    fn clamp_intensities_rec(&self, tape: &mut Tape, state: &DualValue) -> Result<DualValue> {
        let l = self.layout;
        let xy = tape.slice_cols(state, 0, 2 * l.num_keypoints)?;
        let m = tape.slice_cols(state, 2 * l.num_keypoints, l.num_keypoints)?;
        let m = tape.clamp(&m, 0.0, 1.0)?;
        if l.dof == 0 {
            return tape.concat_cols(&[&xy, &m]);
        }
        let rest = tape.slice_cols(state, 3 * l.num_keypoints, 2 * l.dof)?;
        tape.concat_cols(&[&xy, &m, &rest])
    }

    /// Plain one-step prediction; same arithmetic as `predict_rec` without
    /// recording. Used by sampling planners that only need values.
    pub fn predict(&self, state: &Tensor, action: &Tensor) -> Result<Tensor> {
        self.check_shapes(state.shape(), action.shape())?;
        let joint = Tensor::concat_cols(&[state, action])?;
        let centered = joint.broadcast_zip(&Tensor::row(self.input_norm.mean.clone()), |a, b| a - b)?;
        let inv_std: Vec<f64> = self.input_norm.std.iter().map(|s| 1.0 / s).collect();
        let normed = centered.broadcast_zip(&Tensor::row(inv_std), |a, b| a * b)?;
        let raw_delta = self.mlp.forward(&normed)?;
        let scaled = raw_delta.broadcast_zip(&Tensor::row(self.delta_norm.std.clone()), |a, b| a * b)?;
        let delta = scaled.broadcast_zip(&Tensor::row(self.delta_norm.mean.clone()), |a, b| a + b)?;
        let mut next = state.broadcast_zip(&delta, |a, b| a + b)?;
        let l = self.layout;
        for r in 0..next.rows() {
            for c in l.intensity_range() {
                let v = next.get(r, c);
                next.set(r, c, v.clamp(0.0, 1.0));
            }
        }
        Ok(next)
    }

    /// Open-loop rollout from a single state row under an action matrix
    /// (one row per step). Returns all visited states, `actions.rows() + 1`
    /// of them, starting with `state`.
    pub fn rollout(&self, state: &Tensor, actions: &Tensor) -> Result<Vec<Tensor>> {
        let mut states = Vec::with_capacity(actions.rows() + 1);
        states.push(state.clone());
        let mut s = state.clone();
        for t in 0..actions.rows() {
            let a = Tensor::row(actions.row_slice(t).to_vec());
            s = self.predict(&s, &a)?;
            states.push(s.clone());
        }
        Ok(states)
    }

    fn check_shapes(&self, state: (usize, usize), action: (usize, usize)) -> Result<()> {
        if state.1 != self.state_dim() {
            return Err(Error::shape(
                "dynamics state",
                format!("{} columns", self.state_dim()),
                format!("{}x{}", state.0, state.1),
            ));
        }
        if action.1 != self.action_dim || action.0 != state.0 {
            return Err(Error::shape(
                "dynamics action",
                format!("{}x{}", state.0, self.action_dim),
                format!("{}x{}", action.0, action.1),
            ));
        }
        Ok(())
    }
}
