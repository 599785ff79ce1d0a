//! Networks of the adversarial pipeline: a state-action discriminator,
//! a state value function, and a bounded policy. All three start with a
//! zeroed final layer, so the discriminator opens undecided at 1/2, the
//! value function at zero, and the policy at the midpoint action.

use rand_chacha::ChaCha8Rng;

use crate::autodiff::{DualValue, Tape, Tensor};
use crate::error::{Error, Result};
use crate::mlp::{Activation, MlpParamNodes, MlpParams};

/// Logits are clamped to this band before the sigmoid, which bounds the
/// derived reward and keeps the cross-entropy finite at saturation.
pub const LOGIT_LIMIT: f64 = 20.0;

/// Classifies state-action pairs as expert or policy. The reward handed
/// to the planner and the policy is the clamped logit.
#[derive(Debug, Clone, PartialEq)]
pub struct Discriminator {
    pub mlp: MlpParams,
    pub action_dim: usize,
}

impl Discriminator {
    pub fn init(
        state_dim: usize,
        action_dim: usize,
        hidden: &[usize],
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        let mut sizes = vec![state_dim + action_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(1);
        let mut mlp = MlpParams::init(&sizes, Activation::Tanh, rng)?;
        mlp.zero_final_layer();
        Ok(Discriminator { mlp, action_dim })
    }

    pub fn state_dim(&self) -> usize {
        self.mlp.input_dim() - self.action_dim
    }

    /// Clamped logits for matched batches of state and action rows.
    pub fn logits(&self, states: &Tensor, actions: &Tensor) -> Result<Tensor> {
        let x = Tensor::concat_cols(&[states, actions])?;
        Ok(self.mlp.forward(&x)?.clamp(-LOGIT_LIMIT, LOGIT_LIMIT))
    }

    pub fn logits_rec(
        &self,
        tape: &mut Tape,
        states: &DualValue,
        actions: &DualValue,
        nodes: &MlpParamNodes,
    ) -> Result<DualValue> {
        let x = tape.concat_cols(&[states, actions])?;
        let y = self.mlp.forward_rec(tape, &x, nodes)?;
        tape.clamp(&y, -LOGIT_LIMIT, LOGIT_LIMIT)
    }

    /// Classification probability that the pair came from the expert.
    pub fn prob(&self, state: &Tensor, action: &Tensor) -> Result<f64> {
        let l = self.reward(state, action)?;
        Ok(1.0 / (1.0 + (-l).exp()))
    }

    /// The reward the rest of the pipeline optimizes: log D - log(1 - D),
    /// which is exactly the (clamped) logit.
    pub fn reward(&self, state: &Tensor, action: &Tensor) -> Result<f64> {
        let l = self.logits(state, action)?;
        if l.shape() != (1, 1) {
            return Err(Error::shape("reward input", "single row", l.shape_str()));
        }
        Ok(l.get(0, 0))
    }

    /// Reward with the discriminator frozen, differentiable in state and
    /// action.
    pub fn reward_rec(
        &self,
        tape: &mut Tape,
        states: &DualValue,
        actions: &DualValue,
    ) -> Result<DualValue> {
        let nodes = self.mlp.as_constants();
        self.logits_rec(tape, states, actions, &nodes)
    }
}

/// State value estimate used as the terminal term of the planning
/// objective and trained by temporal differences.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueFn {
    pub mlp: MlpParams,
}

impl ValueFn {
    pub fn init(state_dim: usize, hidden: &[usize], rng: &mut ChaCha8Rng) -> Result<Self> {
        let mut sizes = vec![state_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(1);
        let mut mlp = MlpParams::init(&sizes, Activation::Tanh, rng)?;
        mlp.zero_final_layer();
        Ok(ValueFn { mlp })
    }

    pub fn value(&self, state: &Tensor) -> Result<f64> {
        Ok(self.mlp.forward(state)?.get(0, 0))
    }

    pub fn value_rec(
        &self,
        tape: &mut Tape,
        state: &DualValue,
        nodes: &MlpParamNodes,
    ) -> Result<DualValue> {
        self.mlp.forward_rec(tape, state, nodes)
    }
}

/// Deterministic policy with tanh-squashed outputs, so every action lies
/// strictly inside the configured bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyNet {
    pub mlp: MlpParams,
    pub action_low: f64,
    pub action_high: f64,
}

impl PolicyNet {
    pub fn init(
        state_dim: usize,
        action_dim: usize,
        hidden: &[usize],
        bounds: (f64, f64),
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        let (action_low, action_high) = bounds;
        if !(action_low < action_high) {
            return Err(Error::InvalidInput(format!(
                "action bounds must satisfy low < high, got [{action_low}, {action_high}]"
            )));
        }
        let mut sizes = vec![state_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(action_dim);
        let mut mlp = MlpParams::init(&sizes, Activation::Tanh, rng)?;
        mlp.zero_final_layer();
        Ok(PolicyNet {
            mlp,
            action_low,
            action_high,
        })
    }

    pub fn action_dim(&self) -> usize {
        *self.mlp.sizes.last().unwrap()
    }

    fn squash(&self, t: f64) -> f64 {
        let half = (self.action_high - self.action_low) / 2.0;
        let mid = (self.action_high + self.action_low) / 2.0;
        t * half + mid
    }

    /// Actions for a batch of state rows, one action row each.
    pub fn act(&self, states: &Tensor) -> Result<Tensor> {
        Ok(self.mlp.forward(states)?.map(|y| self.squash(y.tanh())))
    }

    pub fn act_rec(
        &self,
        tape: &mut Tape,
        states: &DualValue,
        nodes: &MlpParamNodes,
    ) -> Result<DualValue> {
        let y = self.mlp.forward_rec(tape, states, nodes)?;
        let t = tape.tanh(&y)?;
        let half = (self.action_high - self.action_low) / 2.0;
        let mid = (self.action_high + self.action_low) / 2.0;
        let scaled = tape.scale(&t, half)?;
        tape.add(&scaled, &DualValue::constant_scalar(mid))
    }
}
