//! Learnable trajectory costs over keypoint coordinates.
//!
//! All variants realize nonnegative weights through softplus of raw
//! parameters, so training can push weights toward zero without flipping
//! the sign of the inner objective. Intensity channels never enter a cost.

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{DualValue, Tape, Tensor};
use crate::error::{Error, Result};
use crate::mlp::{Activation, MlpParamNodes, MlpParams};
use crate::planner::TrajectoryCost;
use crate::types::{KeypointFrame, StateLayout, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CostVariant {
    /// One weight per keypoint and axis on squared distance to goal.
    Weighted,
    /// Adds a per-timestep weight shared across keypoints.
    TimeWeighted,
    /// A small network maps each predicted frame (goal-relative and
    /// absolute keypoint coordinates) to a scalar stage cost.
    Rbf,
}

/// Cost parameters. Raw tensors are unconstrained; evaluation maps them
/// through softplus where a nonnegative weight is required.
#[derive(Debug, Clone, PartialEq)]
pub enum CostParams {
    Weighted {
        raw_x: Tensor,
        raw_y: Tensor,
    },
    TimeWeighted {
        raw_x: Tensor,
        raw_y: Tensor,
        raw_time: Tensor,
    },
    Rbf {
        mlp: MlpParams,
    },
}

/// Tape-side counterpart of [`CostParams`]: the same tensors as recorded
/// or constant dual values, in `tensors()` order.
pub enum CostNodes {
    Weighted {
        raw_x: DualValue,
        raw_y: DualValue,
    },
    TimeWeighted {
        raw_x: DualValue,
        raw_y: DualValue,
        raw_time: DualValue,
    },
    Rbf {
        params: MlpParamNodes,
    },
}

impl CostNodes {
    pub fn all(&self) -> Vec<&DualValue> {
        match self {
            CostNodes::Weighted { raw_x, raw_y } => vec![raw_x, raw_y],
            CostNodes::TimeWeighted {
                raw_x,
                raw_y,
                raw_time,
            } => vec![raw_x, raw_y, raw_time],
            CostNodes::Rbf { params } => params.all(),
        }
    }
}

impl CostParams {
    /// Fresh parameters. Weight variants start at zero raw weights
    /// (softplus gives a uniform ln 2); the network variant draws a small
    /// random net over `4 * num_keypoints` frame features.
    pub fn init(
        variant: CostVariant,
        num_keypoints: usize,
        horizon: usize,
        rbf_hidden: &[usize],
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        if num_keypoints == 0 {
            return Err(Error::InvalidInput("cost needs at least one keypoint".into()));
        }
        Ok(match variant {
            CostVariant::Weighted => CostParams::Weighted {
                raw_x: Tensor::zeros(1, num_keypoints),
                raw_y: Tensor::zeros(1, num_keypoints),
            },
            CostVariant::TimeWeighted => {
                if horizon == 0 {
                    return Err(Error::InvalidInput(
                        "time-weighted cost needs a horizon of at least 1".into(),
                    ));
                }
                CostParams::TimeWeighted {
                    raw_x: Tensor::zeros(1, num_keypoints),
                    raw_y: Tensor::zeros(1, num_keypoints),
                    raw_time: Tensor::zeros(1, horizon),
                }
            }
            CostVariant::Rbf => {
                let mut sizes = vec![4 * num_keypoints];
                sizes.extend_from_slice(rbf_hidden);
                sizes.push(1);
                CostParams::Rbf {
                    mlp: MlpParams::init(&sizes, Activation::Tanh, rng)?,
                }
            }
        })
    }

    pub fn variant(&self) -> CostVariant {
        match self {
            CostParams::Weighted { .. } => CostVariant::Weighted,
            CostParams::TimeWeighted { .. } => CostVariant::TimeWeighted,
            CostParams::Rbf { .. } => CostVariant::Rbf,
        }
    }

    pub fn num_keypoints(&self) -> Option<usize> {
        match self {
            CostParams::Weighted { raw_x, .. } | CostParams::TimeWeighted { raw_x, .. } => {
                Some(raw_x.cols())
            }
            CostParams::Rbf { mlp } => Some(mlp.input_dim() / 4),
        }
    }

    pub fn tensors(&self) -> Vec<&Tensor> {
        match self {
            CostParams::Weighted { raw_x, raw_y } => vec![raw_x, raw_y],
            CostParams::TimeWeighted {
                raw_x,
                raw_y,
                raw_time,
            } => vec![raw_x, raw_y, raw_time],
            CostParams::Rbf { mlp } => mlp.tensors(),
        }
    }

    /// Mutable views of the raw tensors, in the same order as `tensors()`.
    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        match self {
            CostParams::Weighted { raw_x, raw_y } => vec![raw_x, raw_y],
            CostParams::TimeWeighted {
                raw_x,
                raw_y,
                raw_time,
            } => vec![raw_x, raw_y, raw_time],
            CostParams::Rbf { mlp } => mlp
                .weights
                .iter_mut()
                .zip(mlp.biases.iter_mut())
                .flat_map(|(w, b)| [w, b])
                .collect(),
        }
    }

    /// Records the parameters as differentiation roots.
    pub fn record(&self, tape: &mut Tape) -> CostNodes {
        match self {
            CostParams::Weighted { raw_x, raw_y } => CostNodes::Weighted {
                raw_x: tape.var(raw_x.clone()),
                raw_y: tape.var(raw_y.clone()),
            },
            CostParams::TimeWeighted {
                raw_x,
                raw_y,
                raw_time,
            } => CostNodes::TimeWeighted {
                raw_x: tape.var(raw_x.clone()),
                raw_y: tape.var(raw_y.clone()),
                raw_time: tape.var(raw_time.clone()),
            },
            CostParams::Rbf { mlp } => CostNodes::Rbf {
                params: mlp.record(tape),
            },
        }
    }

    /// The same parameters as plain constants, for evaluation-only use.
    pub fn as_constants(&self) -> CostNodes {
        match self {
            CostParams::Weighted { raw_x, raw_y } => CostNodes::Weighted {
                raw_x: DualValue::constant(raw_x.clone()),
                raw_y: DualValue::constant(raw_y.clone()),
            },
            CostParams::TimeWeighted {
                raw_x,
                raw_y,
                raw_time,
            } => CostNodes::TimeWeighted {
                raw_x: DualValue::constant(raw_x.clone()),
                raw_y: DualValue::constant(raw_y.clone()),
                raw_time: DualValue::constant(raw_time.clone()),
            },
            CostParams::Rbf { mlp } => CostNodes::Rbf {
                params: mlp.as_constants(),
            },
        }
    }

    /// One plain gradient-descent step on the raw parameters.
    pub fn apply_update(&mut self, grads: &[Tensor], lr: f64) -> Result<()> {
        let check = |t: &mut Tensor, g: &Tensor| -> Result<()> {
            if t.shape() != g.shape() {
                return Err(Error::shape(
                    "cost update",
                    t.shape_str(),
                    g.shape_str(),
                ));
            }
            *t = t.broadcast_zip(g, |a, b| a - lr * b)?;
            Ok(())
        };
        match self {
            CostParams::Weighted { raw_x, raw_y } => {
                if grads.len() != 2 {
                    return Err(Error::shape("cost update", "2 tensors", grads.len().to_string()));
                }
                check(raw_x, &grads[0])?;
                check(raw_y, &grads[1])
            }
            CostParams::TimeWeighted {
                raw_x,
                raw_y,
                raw_time,
            } => {
                if grads.len() != 3 {
                    return Err(Error::shape("cost update", "3 tensors", grads.len().to_string()));
                }
                check(raw_x, &grads[0])?;
                check(raw_y, &grads[1])?;
                check(raw_time, &grads[2])
            }
            CostParams::Rbf { mlp } => mlp.apply_update(grads, lr),
        }
    }

    /// Records the cost of a planned state sequence against a goal frame.
    /// `states` holds one latent row per planned step; the weight variants
    /// sum softplus-weighted squared distances to the goal, the network
    /// variant sums its stage cost over steps.
    pub fn cost_rec(
        &self,
        tape: &mut Tape,
        nodes: &CostNodes,
        states: &[DualValue],
        goal: &KeypointFrame,
        layout: StateLayout,
    ) -> Result<DualValue> {
        let k = layout.num_keypoints;
        if goal.len() != k {
            return Err(Error::shape(
                "cost goal frame",
                format!("{k} keypoints"),
                format!("{}", goal.len()),
            ));
        }
        if let Some(pk) = self.num_keypoints() {
            if pk != k {
                return Err(Error::shape(
                    "cost parameters",
                    format!("{k} keypoints"),
                    format!("{pk}"),
                ));
            }
        }
        if states.is_empty() {
            return Err(Error::InvalidInput("cost of an empty trajectory".into()));
        }
        let goal_flat = goal.to_flat();
        let gx = DualValue::constant(Tensor::row(goal_flat[..k].to_vec()));
        let gy = DualValue::constant(Tensor::row(goal_flat[k..2 * k].to_vec()));

        match (self, nodes) {
            (CostParams::Weighted { .. }, CostNodes::Weighted { raw_x, raw_y }) => {
                let (sum_x, sum_y) = accumulate_sq(tape, states, &gx, &gy, layout, None)?;
                weighted_total(tape, raw_x, raw_y, &sum_x, &sum_y)
            }
            (
                CostParams::TimeWeighted { raw_time: rt, .. },
                CostNodes::TimeWeighted {
                    raw_x,
                    raw_y,
                    raw_time,
                },
            ) => {
                if rt.cols() != states.len() {
                    return Err(Error::shape(
                        "time weights",
                        format!("{} steps", rt.cols()),
                        format!("{}", states.len()),
                    ));
                }
                let phi_t = tape.softplus(raw_time)?;
                let (sum_x, sum_y) =
                    accumulate_sq(tape, states, &gx, &gy, layout, Some(&phi_t))?;
                weighted_total(tape, raw_x, raw_y, &sum_x, &sum_y)
            }
            (CostParams::Rbf { mlp }, CostNodes::Rbf { params }) => {
                let mut total: Option<DualValue> = None;
                for s in states {
                    let xs = tape.slice_cols(s, layout.x_range().start, k)?;
                    let ys = tape.slice_cols(s, layout.y_range().start, k)?;
                    let dx = tape.sub(&xs, &gx)?;
                    let dy = tape.sub(&ys, &gy)?;
                    let features = tape.concat_cols(&[&dx, &dy, &xs, &ys])?;
                    let stage = mlp.forward_rec(tape, &features, params)?;
                    let stage = tape.sum(&stage)?;
                    total = Some(match total {
                        None => stage,
                        Some(t) => tape.add(&t, &stage)?,
                    });
                }
                Ok(total.unwrap())
            }
            _ => Err(Error::InvalidInput(
                "cost parameters and recorded nodes disagree on the variant".into(),
            )),
        }
    }

    /// Plain evaluation over a trajectory of latent states. The planned
    /// sequence should exclude the fixed start state; pass exactly the
    /// frames the cost is meant to score.
    pub fn cost_eval(&self, traj: &Trajectory, goal: &KeypointFrame) -> Result<f64> {
        if traj.states.is_empty() {
            return Err(Error::InvalidInput("cost of an empty trajectory".into()));
        }
        let layout = traj.states[0].layout();
        let mut tape = Tape::new();
        let nodes = self.as_constants();
        let states: Vec<DualValue> = traj
            .states
            .iter()
            .map(|s| DualValue::constant(s.to_row()))
            .collect();
        self.cost_rec(&mut tape, &nodes, &states, goal, layout)?.scalar()
    }
}

/// Adapts cost parameters to the planner's cost interface for a fixed
/// goal frame. The start state is given, not chosen, so it is excluded
/// from the score.
pub struct LearnedCost<'a> {
    pub params: &'a CostParams,
    pub goal: &'a KeypointFrame,
    pub layout: StateLayout,
}

impl TrajectoryCost for LearnedCost<'_> {
    fn cost_rec(&self, tape: &mut Tape, states: &[DualValue]) -> Result<DualValue> {
        if states.len() < 2 {
            return Err(Error::InvalidInput(
                "planned trajectory has no steps to score".into(),
            ));
        }
        let nodes = self.params.as_constants();
        self.params
            .cost_rec(tape, &nodes, &states[1..], self.goal, self.layout)
    }
}

/// Per-keypoint sums of squared goal distances over time, optionally
/// weighting each step by the matching column of `step_weights`.
fn accumulate_sq(
    tape: &mut Tape,
    states: &[DualValue],
    gx: &DualValue,
    gy: &DualValue,
    layout: StateLayout,
    step_weights: Option<&DualValue>,
) -> Result<(DualValue, DualValue)> {
    let k = layout.num_keypoints;
    let mut sum_x: Option<DualValue> = None;
    let mut sum_y: Option<DualValue> = None;
    for (t, s) in states.iter().enumerate() {
        let xs = tape.slice_cols(s, layout.x_range().start, k)?;
        let ys = tape.slice_cols(s, layout.y_range().start, k)?;
        let dx = tape.sub(&xs, gx)?;
        let dy = tape.sub(&ys, gy)?;
        let mut sx = tape.square(&dx)?;
        let mut sy = tape.square(&dy)?;
        if let Some(w) = step_weights {
            let wt = tape.slice_cols(w, t, 1)?;
            sx = tape.mul(&sx, &wt)?;
            sy = tape.mul(&sy, &wt)?;
        }
        sum_x = Some(match sum_x {
            None => sx,
            Some(acc) => tape.add(&acc, &sx)?,
        });
        sum_y = Some(match sum_y {
            None => sy,
            Some(acc) => tape.add(&acc, &sy)?,
        });
    }
    Ok((sum_x.unwrap(), sum_y.unwrap()))
}

fn weighted_total(
    tape: &mut Tape,
    raw_x: &DualValue,
    raw_y: &DualValue,
    sum_x: &DualValue,
    sum_y: &DualValue,
) -> Result<DualValue> {
    let phi_x = tape.softplus(raw_x)?;
    let phi_y = tape.softplus(raw_y)?;
    let cx = tape.mul(&phi_x, sum_x)?;
    let cy = tape.mul(&phi_y, sum_y)?;
    let sx = tape.sum(&cx)?;
    let sy = tape.sum(&cy)?;
    tape.add(&sx, &sy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{Keypoint, LatentState};
    use rand::SeedableRng;

    fn frame(coords: &[(f64, f64)]) -> KeypointFrame {
        KeypointFrame::new(
            coords
                .iter()
                .map(|&(x, y)| Keypoint::new(x, y, 1.0))
                .collect(),
        )
    }

    fn state_row(coords: &[(f64, f64)]) -> Tensor {
        LatentState::new(frame(coords), vec![], vec![])
            .unwrap()
            .to_row()
    }

    /// softplus(x) = ln(1 + e^x); this value of x realizes weight 1.
    const RAW_FOR_ONE: f64 = 0.5413248546129181;

    #[test]
    fn zero_residual_costs_zero() {
        let goal = frame(&[(2.0, -1.0), (0.5, 3.0)]);
        let layout = StateLayout::new(2, 0);
        let states = vec![
            DualValue::constant(state_row(&[(2.0, -1.0), (0.5, 3.0)])),
            DualValue::constant(state_row(&[(2.0, -1.0), (0.5, 3.0)])),
        ];
        for variant in [CostVariant::Weighted, CostVariant::TimeWeighted] {
            let mut rng = ChaCha8Rng::seed_from_u64(0);
            let params = CostParams::init(variant, 2, 2, &[], &mut rng).unwrap();
            let mut tape = Tape::new();
            let nodes = params.as_constants();
            let c = params
                .cost_rec(&mut tape, &nodes, &states, &goal, layout)
                .unwrap();
            assert_eq!(c.scalar().unwrap(), 0.0);
        }
    }

    #[test]
    fn three_four_five_example() {
        let goal = frame(&[(0.0, 0.0)]);
        let layout = StateLayout::new(1, 0);
        let params = CostParams::Weighted {
            raw_x: Tensor::row(vec![RAW_FOR_ONE]),
            raw_y: Tensor::row(vec![RAW_FOR_ONE]),
        };
        let states = vec![DualValue::constant(state_row(&[(3.0, 4.0)]))];
        let mut tape = Tape::new();
        let nodes = params.as_constants();
        let c = params
            .cost_rec(&mut tape, &nodes, &states, &goal, layout)
            .unwrap();
        assert!((c.scalar().unwrap() - 25.0).abs() < 1e-12);
    }

    #[test]
    fn doubling_weights_doubles_cost_and_keeps_argmin() {
        let goal = frame(&[(1.0, 0.0)]);
        let layout = StateLayout::new(1, 0);
        let base = CostParams::Weighted {
            raw_x: Tensor::row(vec![0.3]),
            raw_y: Tensor::row(vec![-0.2]),
        };
        let phi = |raw: f64| (raw.max(0.0)) + (-raw.abs()).exp().ln_1p();
        let inv = |p: f64| (p.exp() - 1.0).ln();
        let doubled = CostParams::Weighted {
            raw_x: Tensor::row(vec![inv(2.0 * phi(0.3))]),
            raw_y: Tensor::row(vec![inv(2.0 * phi(-0.2))]),
        };

        let eval = |params: &CostParams, x: f64| {
            let states = vec![DualValue::constant(state_row(&[(x, 0.4)]))];
            let mut tape = Tape::new();
            let nodes = params.as_constants();
            params
                .cost_rec(&mut tape, &nodes, &states, &goal, layout)
                .unwrap()
                .scalar()
                .unwrap()
        };

        let c1 = eval(&base, 0.25);
        let c2 = eval(&doubled, 0.25);
        assert!((c2 - 2.0 * c1).abs() < 1e-9 * c1.abs().max(1.0));

        // Brute-force argmin over a 1-D sweep is unchanged by the scaling.
        let argmin = |params: &CostParams| {
            (0..=200)
                .map(|i| -1.0 + i as f64 * 0.01)
                .min_by(|&a, &b| eval(params, a).total_cmp(&eval(params, b)))
                .unwrap()
        };
        assert_eq!(argmin(&base), argmin(&doubled));
    }

    #[test]
    fn keypoint_count_mismatch_is_an_error() {
        let goal = frame(&[(0.0, 0.0)]);
        let layout = StateLayout::new(1, 0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let params = CostParams::init(CostVariant::Weighted, 2, 1, &[], &mut rng).unwrap();
        let states = vec![DualValue::constant(state_row(&[(1.0, 1.0)]))];
        let mut tape = Tape::new();
        let nodes = params.as_constants();
        assert!(params
            .cost_rec(&mut tape, &nodes, &states, &goal, layout)
            .is_err());
    }

    #[test]
    fn time_weights_scale_single_steps() {
        // Two identical frames; weighting step 0 by phi and step 1 by ~0
        // should reproduce phi * single-step cost.
        let goal = frame(&[(0.0, 0.0)]);
        let layout = StateLayout::new(1, 0);
        let params = CostParams::TimeWeighted {
            raw_x: Tensor::row(vec![RAW_FOR_ONE]),
            raw_y: Tensor::row(vec![RAW_FOR_ONE]),
            raw_time: Tensor::row(vec![RAW_FOR_ONE, -40.0]),
        };
        let states = vec![
            DualValue::constant(state_row(&[(3.0, 4.0)])),
            DualValue::constant(state_row(&[(3.0, 4.0)])),
        ];
        let mut tape = Tape::new();
        let nodes = params.as_constants();
        let c = params
            .cost_rec(&mut tape, &nodes, &states, &goal, layout)
            .unwrap();
        assert!((c.scalar().unwrap() - 25.0).abs() < 1e-9);
    }

    #[test]
    fn rbf_cost_runs_and_produces_gradients() {
        let goal = frame(&[(1.0, 1.0), (0.0, 0.0)]);
        let layout = StateLayout::new(2, 0);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let params = CostParams::init(CostVariant::Rbf, 2, 3, &[6], &mut rng).unwrap();
        let mut tape = Tape::new();
        let nodes = params.record(&mut tape);
        let states = vec![
            DualValue::constant(state_row(&[(0.5, 0.2), (0.1, 0.9)])),
            DualValue::constant(state_row(&[(0.7, 0.3), (0.2, 0.8)])),
        ];
        let c = params
            .cost_rec(&mut tape, &nodes, &states, &goal, layout)
            .unwrap();
        let inputs = nodes.all();
        let grads = tape.grad(&c, &inputs).unwrap();
        assert_eq!(grads.len(), params.tensors().len());
        assert!(grads.iter().any(|g| g.data().iter().any(|&v| v != 0.0)));
    }

    #[test]
    fn realized_weights_stay_positive_across_raw_range() {
        for raw in [-700.0, -300.0, -36.0, -1.0, 0.0, 1.0, 300.0, 700.0] {
            let mut tape = Tape::new();
            let x = tape.var(Tensor::scalar(raw));
            let phi = tape.softplus(&x).unwrap();
            let v = phi.scalar().unwrap();
            assert!(v > 0.0 && v.is_finite(), "softplus({raw}) = {v}");
        }
    }

    #[test]
    fn update_moves_raw_weights_against_gradient() {
        let mut params = CostParams::Weighted {
            raw_x: Tensor::row(vec![0.0, 0.0]),
            raw_y: Tensor::row(vec![0.0, 0.0]),
        };
        let grads = vec![
            Tensor::row(vec![1.0, -1.0]),
            Tensor::row(vec![0.0, 2.0]),
        ];
        params.apply_update(&grads, 0.1).unwrap();
        match &params {
            CostParams::Weighted { raw_x, raw_y } => {
                assert_eq!(raw_x.data(), &[-0.1, 0.1]);
                assert_eq!(raw_y.data(), &[0.0, -0.2]);
            }
            _ => unreachable!(),
        }
    }
}
