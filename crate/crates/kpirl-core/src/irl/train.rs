//! Outer-loop cost learning: differentiate the imitation loss through the
//! inner action optimization and descend on the raw cost parameters.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{DualValue, Tape, Tensor};
use crate::error::{Error, Result};
use crate::planner::{plan_gradient, plan_gradient_rec, DiffLatentDynamics, PlannerConfig};
use crate::types::{Demonstration, LatentState, Trajectory};

use super::cost::{CostParams, CostVariant, LearnedCost};
use super::loss::{irl_loss, irl_loss_rec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IrlTrainConfig {
    pub variant: CostVariant,
    /// Outer step size on the raw cost parameters. Zero is allowed and
    /// leaves the parameters fixed, which is useful for probing.
    pub outer_lr: f64,
    /// Inner step size on the action sequence.
    pub inner_alpha: f64,
    pub inner_steps: usize,
    pub iterations: usize,
    /// Upper bound on the planning horizon; demos longer than this are
    /// truncated, and the shortest demo caps the shared horizon.
    pub horizon: usize,
    pub demos_per_batch: usize,
    pub seed: u64,
    /// Re-express demos relative to the robot's start frame before
    /// training. Consumed by the application layer, which knows the
    /// robot's own starting observation; recorded here so it travels
    /// with the rest of the run configuration.
    pub relative_demos: bool,
    /// Hidden layer widths for the network cost variant.
    pub rbf_hidden: Vec<usize>,
}

impl Default for IrlTrainConfig {
    fn default() -> Self {
        IrlTrainConfig {
            variant: CostVariant::Weighted,
            outer_lr: 0.001,
            inner_alpha: 0.01,
            inner_steps: 1,
            iterations: 500,
            horizon: 10,
            demos_per_batch: 1,
            seed: 0,
            relative_demos: false,
            rbf_hidden: vec![16],
        }
    }
}

impl IrlTrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.outer_lr >= 0.0) || !self.outer_lr.is_finite() {
            return Err(Error::InvalidInput(format!(
                "outer learning rate must be finite and nonnegative, got {}",
                self.outer_lr
            )));
        }
        if !(self.inner_alpha > 0.0) || !self.inner_alpha.is_finite() {
            return Err(Error::InvalidInput(format!(
                "inner step size must be finite and positive, got {}",
                self.inner_alpha
            )));
        }
        if self.inner_steps == 0 {
            return Err(Error::InvalidInput("inner steps must be at least 1".into()));
        }
        if self.iterations == 0 {
            return Err(Error::InvalidInput("iterations must be at least 1".into()));
        }
        if self.horizon == 0 {
            return Err(Error::InvalidInput("horizon must be at least 1".into()));
        }
        if self.demos_per_batch == 0 {
            return Err(Error::InvalidInput("demos per batch must be at least 1".into()));
        }
        Ok(())
    }

    fn planner_cfg(&self, horizon: usize) -> PlannerConfig {
        PlannerConfig {
            horizon,
            alpha: self.inner_alpha,
            inner_steps: self.inner_steps,
            ..PlannerConfig::default()
        }
    }
}

/// One outer gradient evaluation: the gradient on the raw cost
/// parameters, the imitation loss it descends, and the trajectory the
/// inner optimization produced.
pub struct OuterGrad {
    pub grads: Vec<Tensor>,
    pub loss: f64,
    pub planned: Trajectory,
}

/// Steps both sequences share once a demo is truncated to the horizon.
fn demo_steps(demo: &Demonstration, cfg: &IrlTrainConfig) -> Result<usize> {
    if demo.frames.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "demo {} has {} frame(s), need at least 2",
            demo.scenario_id,
            demo.frames.len()
        )));
    }
    Ok(cfg.horizon.min(demo.frames.len() - 1))
}

/// Differentiates the imitation loss with respect to the cost parameters
/// through the inner planning updates: record the parameters, leave the
/// inner gradient steps live on the tape, re-roll the adjusted actions,
/// score against the demo, and run one reverse sweep.
pub fn outer_grad<D: DiffLatentDynamics + ?Sized>(
    params: &CostParams,
    demo: &Demonstration,
    dynamics: &D,
    cfg: &IrlTrainConfig,
) -> Result<OuterGrad> {
    cfg.validate()?;
    let steps = demo_steps(demo, cfg)?;
    let start = demo.initial_state()?;
    let layout = start.layout();
    if layout.dim() != dynamics.state_dim() {
        return Err(Error::shape(
            "demo latent state",
            format!("{} dims", dynamics.state_dim()),
            format!("{}", layout.dim()),
        ));
    }

    let mut tape = Tape::new();
    let nodes = params.record(&mut tape);
    let s0 = DualValue::constant(start.to_row());
    let u0 = tape.var(Tensor::zeros(1, steps * dynamics.action_dim()));
    let (_, states) = plan_gradient_rec(
        &mut tape,
        dynamics,
        |t, states| params.cost_rec(t, &nodes, &states[1..], &demo.goal, layout),
        &s0,
        &u0,
        &cfg.planner_cfg(steps),
    )?;
    let loss_node = irl_loss_rec(&mut tape, &states, &demo.frames[..=steps], layout)?;
    let loss = loss_node.scalar()?;
    let inputs = nodes.all();
    let grads = tape.grad(&loss_node, &inputs)?;

    let planned = states
        .iter()
        .map(|s| LatentState::from_row(s.value(), layout))
        .collect::<Result<Vec<_>>>()?;
    Ok(OuterGrad {
        grads,
        loss,
        planned: Trajectory::new(planned),
    })
}

/// Training state that survives checkpointing: current parameters, the
/// best parameters seen so far, and where the iteration counter stands.
#[derive(Debug, Clone, PartialEq)]
pub struct IrlState {
    pub params: CostParams,
    pub best_params: CostParams,
    pub best_loss: Option<f64>,
    pub next_iteration: u64,
}

impl IrlState {
    /// Fresh parameters for the given demos. The shared horizon comes
    /// from the shortest demo so every demo aligns to the same length.
    pub fn init(demos: &[Demonstration], cfg: &IrlTrainConfig) -> Result<Self> {
        cfg.validate()?;
        let horizon = shared_horizon(demos, cfg)?;
        let first = demos[0]
            .frames
            .first()
            .ok_or_else(|| Error::InvalidInput("demo has no frames".into()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let params = CostParams::init(cfg.variant, first.len(), horizon, &cfg.rbf_hidden, &mut rng)?;
        Ok(IrlState {
            best_params: params.clone(),
            params,
            best_loss: None,
            next_iteration: 0,
        })
    }
}

/// Horizon every demo in the set is truncated to.
pub fn shared_horizon(demos: &[Demonstration], cfg: &IrlTrainConfig) -> Result<usize> {
    let mut horizon = cfg.horizon;
    if demos.is_empty() {
        return Err(Error::InvalidInput("training needs at least one demo".into()));
    }
    for demo in demos {
        horizon = horizon.min(demo_steps(demo, cfg)?);
    }
    Ok(horizon)
}

fn at_outer_iteration(err: Error, iteration: u64) -> Error {
    match err {
        Error::NonFinite { context, detail } => Error::NonFinite {
            context,
            detail: Some(match detail {
                Some(d) => format!("outer iteration {iteration}, {d}"),
                None => format!("outer iteration {iteration}"),
            }),
        },
        other => other,
    }
}

/// Runs `iterations` outer updates on `state`, returning the loss
/// recorded at each iteration (evaluated before that iteration's
/// update). Demos cycle round-robin from wherever the iteration counter
/// stands, so split runs reproduce a single long run exactly.
pub fn train_irl_steps<D: DiffLatentDynamics + ?Sized>(
    state: &mut IrlState,
    demos: &[Demonstration],
    dynamics: &D,
    cfg: &IrlTrainConfig,
    iterations: usize,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    let horizon = shared_horizon(demos, cfg)?;
    let aligned_cfg = IrlTrainConfig {
        horizon,
        ..cfg.clone()
    };
    let batch = cfg.demos_per_batch.min(demos.len());
    let mut curve = Vec::with_capacity(iterations);
    for _ in 0..iterations {
        let it = state.next_iteration;
        let mut grads: Option<Vec<Tensor>> = None;
        let mut loss_sum = 0.0;
        for j in 0..batch {
            let idx = ((it as usize) * batch + j) % demos.len();
            let og = outer_grad(&state.params, &demos[idx], dynamics, &aligned_cfg)
                .map_err(|e| at_outer_iteration(e, it))?;
            loss_sum += og.loss;
            grads = Some(match grads {
                None => og.grads,
                Some(acc) => acc
                    .iter()
                    .zip(&og.grads)
                    .map(|(a, b)| a.broadcast_zip(b, |x, y| x + y))
                    .collect::<Result<Vec<_>>>()?,
            });
        }
        let loss = loss_sum / batch as f64;
        if !loss.is_finite() {
            return Err(Error::non_finite_at(
                "imitation loss",
                format!("outer iteration {it}"),
            ));
        }
        let grads: Vec<Tensor> = grads
            .unwrap()
            .into_iter()
            .map(|g| g.map(|v| v / batch as f64))
            .collect();
        if grads.iter().any(|g| !g.is_finite()) {
            return Err(Error::non_finite_at(
                "cost parameter gradient",
                format!("outer iteration {it}"),
            ));
        }
        curve.push(loss);
        if state.best_loss.map_or(true, |b| loss < b) {
            state.best_loss = Some(loss);
            state.best_params = state.params.clone();
        }
        state.params.apply_update(&grads, cfg.outer_lr)?;
        state.next_iteration = it + 1;
    }
    Ok(curve)
}

/// Full training run from fresh parameters. Returns the best parameters
/// seen (by recorded loss) and the per-iteration loss curve.
pub fn train_irl<D: DiffLatentDynamics + ?Sized>(
    demos: &[Demonstration],
    dynamics: &D,
    cfg: &IrlTrainConfig,
) -> Result<(CostParams, Vec<f64>)> {
    let mut state = IrlState::init(demos, cfg)?;
    let curve = train_irl_steps(&mut state, demos, dynamics, cfg, cfg.iterations)?;
    Ok((state.best_params, curve))
}

/// Mean squared distance to the goal per keypoint and axis, the feature
/// vector the baseline matches. Rows follow `tensors()` order: x weights
/// first, then y.
fn goal_features(
    frames_xy: &[(Vec<f64>, Vec<f64>)],
    goal_x: &[f64],
    goal_y: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    let k = goal_x.len();
    let t = frames_xy.len() as f64;
    let mut fx = vec![0.0; k];
    let mut fy = vec![0.0; k];
    for (xs, ys) in frames_xy {
        for i in 0..k {
            fx[i] += (xs[i] - goal_x[i]).powi(2) / t;
            fy[i] += (ys[i] - goal_y[i]).powi(2) / t;
        }
    }
    (fx, fy)
}

/// Classic feature matching over the same planner: raise a weight when
/// the planner sits farther from the goal than the demo along that
/// keypoint axis, lower it when closer. The recorded curve is the
/// imitation loss of each iteration's plan, directly comparable to
/// `train_irl`'s curve.
pub fn feature_matching_baseline<D: DiffLatentDynamics + ?Sized>(
    demos: &[Demonstration],
    dynamics: &D,
    cfg: &IrlTrainConfig,
) -> Result<(CostParams, Vec<f64>)> {
    cfg.validate()?;
    if cfg.variant != CostVariant::Weighted {
        return Err(Error::InvalidInput(
            "feature matching only supports the per-keypoint weight variant".into(),
        ));
    }
    let horizon = shared_horizon(demos, cfg)?;
    let first = &demos[0].frames[0];
    let k = first.len();
    let mut params = CostParams::Weighted {
        raw_x: Tensor::zeros(1, k),
        raw_y: Tensor::zeros(1, k),
    };
    let mut curve = Vec::with_capacity(cfg.iterations);
    for it in 0..cfg.iterations {
        let demo = &demos[it % demos.len()];
        let start = demo.initial_state()?;
        let layout = start.layout();
        let cost = LearnedCost {
            params: &params,
            goal: &demo.goal,
            layout,
        };
        let (_, states) = plan_gradient(
            dynamics,
            &cost,
            &start.to_row(),
            None,
            &cfg.planner_cfg(horizon),
        )
        .map_err(|e| at_outer_iteration(e, it as u64))?;

        let planned = Trajectory::new(
            states
                .iter()
                .map(|s| LatentState::from_row(s, layout))
                .collect::<Result<Vec<_>>>()?,
        );
        let aligned = Demonstration {
            frames: demo.frames[..=horizon].to_vec(),
            ..demo.clone()
        };
        let loss = irl_loss(&aligned, &planned)?;
        if !loss.is_finite() {
            return Err(Error::non_finite_at(
                "imitation loss",
                format!("outer iteration {it}"),
            ));
        }
        curve.push(loss);

        let goal_flat = demo.goal.to_flat();
        let (gx, gy) = (&goal_flat[..k], &goal_flat[k..2 * k]);
        let split = |frames: Vec<Vec<f64>>| -> Vec<(Vec<f64>, Vec<f64>)> {
            frames
                .into_iter()
                .map(|f| (f[..k].to_vec(), f[k..2 * k].to_vec()))
                .collect()
        };
        let plan_xy = split(
            planned.states[1..]
                .iter()
                .map(|s| s.frame.to_flat())
                .collect(),
        );
        let demo_xy = split(
            demo.frames[1..=horizon]
                .iter()
                .map(|f| f.to_flat())
                .collect(),
        );
        let (plan_fx, plan_fy) = goal_features(&plan_xy, gx, gy);
        let (demo_fx, demo_fy) = goal_features(&demo_xy, gx, gy);

        match &mut params {
            CostParams::Weighted { raw_x, raw_y } => {
                for i in 0..k {
                    let vx = raw_x.get(0, i) + cfg.outer_lr * (plan_fx[i] - demo_fx[i]);
                    let vy = raw_y.get(0, i) + cfg.outer_lr * (plan_fy[i] - demo_fy[i]);
                    raw_x.set(0, i, vx);
                    raw_y.set(0, i, vy);
                }
            }
            _ => unreachable!(),
        }
    }
    Ok((params, curve))
}
