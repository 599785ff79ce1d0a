//! Interfaces the planners work against: a one-step latent model, its
//! differentiable variant, and a cost over rolled-out state sequences.

use serde::{Deserialize, Serialize};

use crate::autodiff::{DualValue, Tape, Tensor};
use crate::dynamics::DynModel;
use crate::error::{Error, Result};

/// One-step latent transition model over row-vector states and actions.
pub trait LatentDynamics {
    fn state_dim(&self) -> usize;
    fn action_dim(&self) -> usize;

    /// Predicts the next state row from a state row and an action row.
    fn predict(&self, state: &Tensor, action: &Tensor) -> Result<Tensor>;

    /// Open-loop rollout under an action matrix (one row per step).
    /// Returns `actions.rows() + 1` states starting with `state`.
    fn rollout(&self, state: &Tensor, actions: &Tensor) -> Result<Vec<Tensor>> {
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
}

/// A latent model whose transition can be recorded on a tape, making
/// rollouts differentiable with respect to the actions driving them.
pub trait DiffLatentDynamics: LatentDynamics {
    fn predict_rec(
        &self,
        tape: &mut Tape,
        state: &DualValue,
        action: &DualValue,
    ) -> Result<DualValue>;
}

impl LatentDynamics for DynModel {
    fn state_dim(&self) -> usize {
        DynModel::state_dim(self)
    }

    fn action_dim(&self) -> usize {
        self.action_dim
    }

    fn predict(&self, state: &Tensor, action: &Tensor) -> Result<Tensor> {
        DynModel::predict(self, state, action)
    }
}

impl DiffLatentDynamics for DynModel {
    fn predict_rec(
        &self,
        tape: &mut Tape,
        state: &DualValue,
        action: &DualValue,
    ) -> Result<DualValue> {
        let params = self.mlp.as_constants();
        DynModel::predict_rec(self, tape, state, action, &params)
    }
}

/// Scalar cost of a planned state sequence. Implementations close over
/// whatever goal or parameters they need; planners only see the states.
pub trait TrajectoryCost {
    /// Records the cost of a state sequence as a live scalar node.
    fn cost_rec(&self, tape: &mut Tape, states: &[DualValue]) -> Result<DualValue>;

    /// Plain evaluation, routed through the recorded form on a scratch
    /// tape so both paths share one definition.
    fn cost(&self, states: &[Tensor]) -> Result<f64> {
        let mut tape = Tape::new();
        let wrapped: Vec<DualValue> = states
            .iter()
            .map(|s| DualValue::constant(s.clone()))
            .collect();
        self.cost_rec(&mut tape, &wrapped)?.scalar()
    }

    /// Plain evaluation that also sees the action matrix (one row per
    /// step) behind the rollout. State-only costs inherit this; costs
    /// that charge or reward the actions themselves override it, and the
    /// sampling planner always evaluates through here.
    fn cost_with_actions(&self, states: &[Tensor], _actions: &Tensor) -> Result<f64> {
        self.cost(states)
    }
}

/// Knobs shared by both planners. The sampling fields only matter to the
/// population planner, the inner-step fields only to the gradient one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerConfig {
    /// Planning horizon in control steps.
    pub horizon: usize,
    /// Inner learning rate for gradient planning.
    pub alpha: f64,
    /// Number of gradient updates on the action sequence.
    pub inner_steps: usize,
    /// Population size per sampling iteration.
    pub population: usize,
    /// Fraction of the population kept as elites.
    pub elite_frac: f64,
    /// Sampling iterations.
    pub iterations: usize,
    /// Initial per-coordinate sampling std.
    pub init_std: f64,
    /// Element-wise action bounds.
    pub action_low: f64,
    pub action_high: f64,
    /// Seed for the sampling stream.
    pub seed: u64,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        PlannerConfig {
            horizon: 10,
            alpha: 0.01,
            inner_steps: 1,
            population: 64,
            elite_frac: 0.125,
            iterations: 10,
            init_std: 0.3,
            action_low: -1.0,
            action_high: 1.0,
            seed: 0,
        }
    }
}

impl PlannerConfig {
    pub fn elite_count(&self) -> usize {
        ((self.population as f64 * self.elite_frac).round() as usize).max(1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::InvalidInput("planning horizon must be >= 1".into()));
        }
        if !(self.alpha > 0.0) {
            return Err(Error::InvalidInput(format!(
                "inner learning rate must be positive, got {}",
                self.alpha
            )));
        }
        if self.population == 0 || self.iterations == 0 {
            return Err(Error::InvalidInput(
                "population and iterations must be >= 1".into(),
            ));
        }
        if !(self.elite_frac > 0.0 && self.elite_frac <= 1.0) {
            return Err(Error::InvalidInput(format!(
                "elite fraction must be in (0, 1], got {}",
                self.elite_frac
            )));
        }
        if !(self.action_low < self.action_high) {
            return Err(Error::InvalidInput(format!(
                "action bounds must satisfy low < high, got [{}, {}]",
                self.action_low, self.action_high
            )));
        }
        if !(self.init_std > 0.0) {
            return Err(Error::InvalidInput(format!(
                "initial sampling std must be positive, got {}",
                self.init_std
            )));
        }
        Ok(())
    }
}
