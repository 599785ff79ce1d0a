//! Receding-horizon execution: plan, apply the first action, re-observe.

use crate::autodiff::Tensor;
use crate::error::Result;
use crate::world::{dist, ee_pos, observe_latent, step_env, Camera, WorldState};

use super::cem::plan_cem;
use super::gradient::plan_gradient;
use super::traits::{DiffLatentDynamics, LatentDynamics, PlannerConfig, TrajectoryCost};

/// One full plan from a given state: the action matrix, its predicted
/// rollout, and the cost the planner assigned to it.
#[derive(Debug, Clone)]
pub struct PlanOutcome {
    pub actions: Tensor,
    pub states: Vec<Tensor>,
    pub cost: f64,
}

/// Anything that can produce a plan from a latent state row, optionally
/// warm-started from the previous plan shifted by one step.
pub trait Planner {
    fn plan(&mut self, s0: &Tensor, warm_start: Option<&Tensor>) -> Result<PlanOutcome>;
}

/// Gradient planner bound to a differentiable model and a cost.
pub struct GradientPlanner<'a, D: DiffLatentDynamics + ?Sized> {
    pub dynamics: &'a D,
    pub cost: &'a dyn TrajectoryCost,
    pub cfg: PlannerConfig,
}

impl<'a, D: DiffLatentDynamics + ?Sized> Planner for GradientPlanner<'a, D> {
    fn plan(&mut self, s0: &Tensor, warm_start: Option<&Tensor>) -> Result<PlanOutcome> {
        let (actions, states) = plan_gradient(self.dynamics, self.cost, s0, warm_start, &self.cfg)?;
        let cost = self.cost.cost(&states)?;
        Ok(PlanOutcome {
            actions,
            states,
            cost,
        })
    }
}

/// Sampling planner; each replan draws from a fresh stream derived from
/// the base seed and a replan counter so runs stay reproducible.
pub struct CemPlanner<'a, D: LatentDynamics + ?Sized> {
    pub dynamics: &'a D,
    pub cost: &'a dyn TrajectoryCost,
    pub cfg: PlannerConfig,
    replans: u64,
}

impl<'a, D: LatentDynamics + ?Sized> CemPlanner<'a, D> {
    pub fn new(dynamics: &'a D, cost: &'a dyn TrajectoryCost, cfg: PlannerConfig) -> Self {
        CemPlanner {
            dynamics,
            cost,
            cfg,
            replans: 0,
        }
    }
}

impl<'a, D: LatentDynamics + ?Sized> Planner for CemPlanner<'a, D> {
    fn plan(&mut self, s0: &Tensor, warm_start: Option<&Tensor>) -> Result<PlanOutcome> {
        let mut cfg = self.cfg.clone();
        cfg.seed = self.cfg.seed.wrapping_add(self.replans);
        self.replans += 1;
        let (actions, states, report) = plan_cem(self.dynamics, self.cost, s0, warm_start, &cfg)?;
        let cost = report.best_costs.last().copied().unwrap_or(f64::INFINITY);
        Ok(PlanOutcome {
            actions,
            states,
            cost,
        })
    }
}

#[derive(Debug, Clone)]
pub struct MpcConfig {
    pub max_steps: usize,
    /// Seed the next replan with the previous plan shifted one step and
    /// zero-padded, instead of starting from scratch.
    pub warm_start: bool,
}

impl Default for MpcConfig {
    fn default() -> Self {
        MpcConfig {
            max_steps: 50,
            warm_start: false,
        }
    }
}

/// Per-replan log entry: what the planner expected and what happened.
#[derive(Debug, Clone)]
pub struct MpcStepLog {
    pub step: usize,
    /// Cost the planner assigned to its chosen sequence.
    pub planned_cost: f64,
    /// First action of the plan, as applied to the environment.
    pub action: Vec<f64>,
    /// Latent state the plan predicted one step ahead.
    pub predicted_next: Tensor,
    /// Latent state actually observed one step later.
    pub observed_next: Tensor,
    pub cube_target_dist: f64,
    pub ee_target_dist: f64,
}

#[derive(Debug, Clone)]
pub struct MpcRun {
    pub success: bool,
    /// Environment states visited, starting with the initial one.
    pub states: Vec<WorldState>,
    pub logs: Vec<MpcStepLog>,
}

/// Runs the plan/apply/observe loop until the success predicate holds or
/// `max_steps` environment steps have been taken.
pub fn mpc_execute(
    initial: &WorldState,
    camera: &Camera,
    planner: &mut dyn Planner,
    success: impl Fn(&WorldState) -> bool,
    cfg: &MpcConfig,
) -> Result<MpcRun> {
    let mut state = initial.clone();
    let mut states = vec![state.clone()];
    let mut logs = Vec::new();
    let mut warm: Option<Tensor> = None;
    let mut done = success(&state);

    for step in 0..cfg.max_steps {
        if done {
            break;
        }
        let s_row = observe_latent(camera, &state).to_row();
        let outcome = planner.plan(&s_row, warm.as_ref())?;
        let action = outcome.actions.row_slice(0).to_vec();
        state = step_env(&state, &action)?;
        let observed = observe_latent(camera, &state).to_row();
        logs.push(MpcStepLog {
            step,
            planned_cost: outcome.cost,
            action,
            predicted_next: outcome.states[1].clone(),
            observed_next: observed,
            cube_target_dist: dist(&state.cube_pos, &state.target_pos),
            ee_target_dist: dist(&ee_pos(&state.q), &state.target_pos),
        });
        states.push(state.clone());
        warm = if cfg.warm_start {
            Some(shift_actions(&outcome.actions))
        } else {
            None
        };
        done = success(&state);
    }

    Ok(MpcRun {
        success: done,
        states,
        logs,
    })
}

/// Drops the first action row and appends a zero row, keeping the shape.
pub fn shift_actions(actions: &Tensor) -> Tensor {
    let (t, a) = actions.shape();
    let mut data = Vec::with_capacity(t * a);
    for r in 1..t {
        data.extend_from_slice(actions.row_slice(r));
    }
    data.extend(std::iter::repeat(0.0).take(a));
    Tensor::new(t, a, data).expect("shape preserved")
}
