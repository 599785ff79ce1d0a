//! Fully connected network shared by the dynamics model, the discriminator,
//! the value function, and the policy head.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{DualValue, Tape, Tensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Tanh,
    Relu,
}

/// Weight and bias stack. Hidden layers use `activation`; the final layer
/// is linear.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    pub sizes: Vec<usize>,
    pub weights: Vec<Tensor>,
    pub biases: Vec<Tensor>,
    pub activation: Activation,
}

impl MlpParams {
    /// Glorot-uniform weights, zero biases. `sizes` runs input to output,
    /// so it needs at least an input and an output entry.
    pub fn init(sizes: &[usize], activation: Activation, rng: &mut ChaCha8Rng) -> Result<Self> {
        if sizes.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "need input and output sizes, got {sizes:?}"
            )));
        }
        let mut weights = Vec::with_capacity(sizes.len() - 1);
        let mut biases = Vec::with_capacity(sizes.len() - 1);
        for w in sizes.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let data = (0..fan_in * fan_out)
                .map(|_| rng.gen_range(-bound..bound))
                .collect();
            weights.push(Tensor::new(fan_in, fan_out, data)?);
            biases.push(Tensor::zeros(1, fan_out));
        }
        Ok(MlpParams {
            sizes: sizes.to_vec(),
            weights,
            biases,
            activation,
        })
    }

    /// Rebuilds a network from its layer sizes and a flat weight/bias list
    /// in `tensors()` order, validating every shape.
    pub fn from_parts(
        sizes: Vec<usize>,
        activation: Activation,
        tensors: Vec<Tensor>,
    ) -> Result<Self> {
        if sizes.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "need input and output sizes, got {sizes:?}"
            )));
        }
        let layers = sizes.len() - 1;
        if tensors.len() != 2 * layers {
            return Err(Error::shape(
                "network tensor list",
                format!("{} tensors", 2 * layers),
                format!("{}", tensors.len()),
            ));
        }
        let mut weights = Vec::with_capacity(layers);
        let mut biases = Vec::with_capacity(layers);
        let mut it = tensors.into_iter();
        for (l, w) in sizes.windows(2).enumerate() {
            let weight = it.next().unwrap();
            let bias = it.next().unwrap();
            if weight.shape() != (w[0], w[1]) {
                return Err(Error::shape(
                    "layer weight",
                    format!("{}x{} at layer {l}", w[0], w[1]),
                    weight.shape_str(),
                ));
            }
            if bias.shape() != (1, w[1]) {
                return Err(Error::shape(
                    "layer bias",
                    format!("1x{} at layer {l}", w[1]),
                    bias.shape_str(),
                ));
            }
            weights.push(weight);
            biases.push(bias);
        }
        Ok(MlpParams {
            sizes,
            weights,
            biases,
            activation,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn num_layers(&self) -> usize {
        self.weights.len()
    }

    /// Zeroes the final linear layer. A network in this state outputs
    /// exactly zero everywhere, which callers use for residual-style
    /// identity initialization.
    pub fn zero_final_layer(&mut self) {
        if let Some(w) = self.weights.last_mut() {
            *w = Tensor::zeros(w.rows(), w.cols());
        }
        if let Some(b) = self.biases.last_mut() {
            *b = Tensor::zeros(1, b.cols());
        }
    }

    /// Records the forward pass on a tape. `x` is a batch (rows are
    /// samples); parameters enter as the given dual values so callers
    /// control which of them are differentiation roots.
    pub fn forward_rec(
        &self,
        tape: &mut Tape,
        x: &DualValue,
        params: &MlpParamNodes,
    ) -> Result<DualValue> {
        if x.value().cols() != self.input_dim() {
            return Err(Error::shape(
                "mlp forward",
                format!("{} input columns", self.input_dim()),
                x.value().shape_str(),
            ));
        }
        let mut h = x.clone();
        let last = self.num_layers() - 1;
        for i in 0..self.num_layers() {
            let z = tape.matmul(&h, &params.weights[i])?;
            let z = tape.add(&z, &params.biases[i])?;
            h = if i < last {
                match self.activation {
                    Activation::Tanh => tape.tanh(&z)?,
                    Activation::Relu => tape.relu(&z)?,
                }
            } else {
                z
            };
        }
        Ok(h)
    }

    /// Puts every parameter tensor on the tape as a tracked variable.
    pub fn record(&self, tape: &mut Tape) -> MlpParamNodes {
        MlpParamNodes {
            weights: self.weights.iter().map(|w| tape.var(w.clone())).collect(),
            biases: self.biases.iter().map(|b| tape.var(b.clone())).collect(),
        }
    }

    /// Parameters as constants, for forward passes that never differentiate
    /// with respect to them.
    pub fn as_constants(&self) -> MlpParamNodes {
        MlpParamNodes {
            weights: self
                .weights
                .iter()
                .map(|w| DualValue::constant(w.clone()))
                .collect(),
            biases: self
                .biases
                .iter()
                .map(|b| DualValue::constant(b.clone()))
                .collect(),
        }
    }

    /// Plain forward pass without any tape, for hot loops that only need
    /// values. Kept numerically identical to `forward_rec` by performing
    /// the same operations in the same order.
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        if x.cols() != self.input_dim() {
            return Err(Error::shape(
                "mlp forward",
                format!("{} input columns", self.input_dim()),
                x.shape_str(),
            ));
        }
        let mut h = x.clone();
        let last = self.num_layers() - 1;
        for i in 0..self.num_layers() {
            let z = h.matmul(&self.weights[i])?;
            let z = z.broadcast_zip(&self.biases[i], |a, b| a + b)?;
            h = if i < last {
                match self.activation {
                    Activation::Tanh => z.map(f64::tanh),
                    Activation::Relu => z.map(|v| if v > 0.0 { v } else { 0.0 }),
                }
            } else {
                z
            };
        }
        Ok(h)
    }

    /// Flat view of all parameter tensors, weights and biases interleaved
    /// per layer. Order matches `apply_update` and `record`.
    pub fn tensors(&self) -> Vec<&Tensor> {
        let mut out = Vec::with_capacity(2 * self.num_layers());
        for i in 0..self.num_layers() {
            out.push(&self.weights[i]);
            out.push(&self.biases[i]);
        }
        out
    }

    /// In-place gradient-style update: `p -= step * g` for each parameter
    /// tensor, in `tensors()` order.
    pub fn apply_update(&mut self, grads: &[Tensor], step: f64) -> Result<()> {
        if grads.len() != 2 * self.num_layers() {
            return Err(Error::shape(
                "mlp update",
                format!("{} gradient tensors", 2 * self.num_layers()),
                grads.len().to_string(),
            ));
        }
        for i in 0..self.num_layers() {
            apply_one(&mut self.weights[i], &grads[2 * i], step)?;
            apply_one(&mut self.biases[i], &grads[2 * i + 1], step)?;
        }
        Ok(())
    }
}

fn apply_one(p: &mut Tensor, g: &Tensor, step: f64) -> Result<()> {
    if p.shape() != g.shape() {
        return Err(Error::shape("mlp update", p.shape_str(), g.shape_str()));
    }
    for (pv, gv) in p.data_mut().iter_mut().zip(g.data()) {
        *pv -= step * gv;
    }
    Ok(())
}

/// Tape handles for one recorded parameter set.
#[derive(Debug, Clone)]
pub struct MlpParamNodes {
    pub weights: Vec<DualValue>,
    pub biases: Vec<DualValue>,
}

impl MlpParamNodes {
    /// Differentiation roots in the same order as `MlpParams::tensors`.
    pub fn all(&self) -> Vec<&DualValue> {
        let mut out = Vec::with_capacity(2 * self.weights.len());
        for i in 0..self.weights.len() {
            out.push(&self.weights[i]);
            out.push(&self.biases[i]);
        }
        out
    }
}

/// Adam state for one parameter stack.
#[derive(Debug, Clone)]
pub struct Adam {
    m: Vec<Tensor>,
    v: Vec<Tensor>,
    t: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Adam {
    pub fn new(params: &MlpParams, lr: f64) -> Self {
        let shapes: Vec<Tensor> = params
            .tensors()
            .iter()
            .map(|t| Tensor::zeros(t.rows(), t.cols()))
            .collect();
        Adam {
            m: shapes.clone(),
            v: shapes,
            t: 0,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    /// One Adam step over gradients in `MlpParams::tensors` order.
    pub fn step(&mut self, params: &mut MlpParams, grads: &[Tensor]) -> Result<()> {
        if grads.len() != self.m.len() {
            return Err(Error::shape(
                "adam step",
                format!("{} gradient tensors", self.m.len()),
                grads.len().to_string(),
            ));
        }
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        let mut steps = Vec::with_capacity(grads.len());
        for (i, g) in grads.iter().enumerate() {
            let m = &mut self.m[i];
            let v = &mut self.v[i];
            let mut step = Tensor::zeros(g.rows(), g.cols());
            for j in 0..g.len() {
                let gj = g.data()[j];
                m.data_mut()[j] = self.beta1 * m.data()[j] + (1.0 - self.beta1) * gj;
                v.data_mut()[j] = self.beta2 * v.data()[j] + (1.0 - self.beta2) * gj * gj;
                let mhat = m.data()[j] / bc1;
                let vhat = v.data()[j] / bc2;
                step.data_mut()[j] = mhat / (vhat.sqrt() + self.eps);
            }
            steps.push(step);
        }
        params.apply_update(&steps, self.lr)
    }
}
