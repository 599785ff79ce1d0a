//! Gradient-based action optimization through a recorded rollout.

use crate::autodiff::{DualValue, Tape, Tensor};
use crate::error::{Error, Result};

use super::traits::{DiffLatentDynamics, PlannerConfig, TrajectoryCost};

/// Records an open-loop rollout driven by a flat action row of length
/// `horizon * action_dim`. Returns `horizon + 1` states starting at `s0`.
pub fn rollout_rec<D: DiffLatentDynamics + ?Sized>(
    tape: &mut Tape,
    dynamics: &D,
    s0: &DualValue,
    u_flat: &DualValue,
    horizon: usize,
) -> Result<Vec<DualValue>> {
    let a = dynamics.action_dim();
    let expect = (1, horizon * a);
    if u_flat.value().shape() != expect {
        return Err(Error::shape(
            "flat action row",
            format!("{}x{}", expect.0, expect.1),
            u_flat.value().shape_str(),
        ));
    }
    let mut states = Vec::with_capacity(horizon + 1);
    states.push(s0.clone());
    let mut s = s0.clone();
    for t in 0..horizon {
        let u_t = tape.slice_cols(u_flat, t * a, a)?;
        s = dynamics.predict_rec(tape, &s, &u_t)?;
        states.push(s.clone());
    }
    Ok(states)
}

/// The inner optimization, left live on the caller's tape: `inner_steps`
/// updates `u <- u - alpha * dC/du`, each gradient emitted with
/// `grad_as_graph` so the final actions and trajectory stay differentiable
/// with respect to anything the cost closure recorded (cost parameters in
/// particular). No clamping happens here; the update rule is exactly the
/// bare gradient step.
pub fn plan_gradient_rec<D, C>(
    tape: &mut Tape,
    dynamics: &D,
    mut cost: C,
    s0: &DualValue,
    u_init: &DualValue,
    cfg: &PlannerConfig,
) -> Result<(DualValue, Vec<DualValue>)>
where
    D: DiffLatentDynamics + ?Sized,
    C: FnMut(&mut Tape, &[DualValue]) -> Result<DualValue>,
{
    cfg.validate()?;
    let mut u = u_init.clone();
    for step in 0..cfg.inner_steps {
        let states = rollout_rec(tape, dynamics, s0, &u, cfg.horizon)?;
        let c = cost(tape, &states)?;
        if !c.value().is_finite() {
            return Err(Error::non_finite_at("planning cost", format!("inner step {step}")));
        }
        let g = tape.grad_as_graph(&c, &[&u])?.remove(0);
        if !g.value().is_finite() {
            return Err(Error::non_finite_at(
                "planning gradient",
                format!("inner step {step}"),
            ));
        }
        let delta = tape.scale(&g, cfg.alpha)?;
        u = tape.sub(&u, &delta)?;
    }
    let states = rollout_rec(tape, dynamics, s0, &u, cfg.horizon)?;
    Ok((u, states))
}

/// Plans an action sequence by gradient descent on the rollout cost.
/// Actions start at `u_init` (zeros when absent), take `cfg.inner_steps`
/// bare gradient updates, and are clamped to bounds only on return
/// together with the matching re-rolled trajectory.
pub fn plan_gradient<D: DiffLatentDynamics + ?Sized>(
    dynamics: &D,
    cost: &dyn TrajectoryCost,
    s0: &Tensor,
    u_init: Option<&Tensor>,
    cfg: &PlannerConfig,
) -> Result<(Tensor, Vec<Tensor>)> {
    cfg.validate()?;
    let a = dynamics.action_dim();
    let flat_len = cfg.horizon * a;
    let init_row = match u_init {
        Some(u) => {
            if u.shape() != (cfg.horizon, a) {
                return Err(Error::shape(
                    "initial action sequence",
                    format!("{}x{}", cfg.horizon, a),
                    u.shape_str(),
                ));
            }
            Tensor::row(u.data().to_vec())
        }
        None => Tensor::zeros(1, flat_len),
    };

    let mut tape = Tape::new();
    let s0_val = DualValue::constant(s0.clone());
    let u_var = tape.var(init_row);
    let (u_final, _) = plan_gradient_rec(
        &mut tape,
        dynamics,
        |t, states| cost.cost_rec(t, states),
        &s0_val,
        &u_var,
        cfg,
    )?;

    let flat = u_final.detach().clamp(cfg.action_low, cfg.action_high);
    let actions = Tensor::new(cfg.horizon, a, flat.data().to_vec())?;
    let states = dynamics.rollout(s0, &actions)?;
    Ok((actions, states))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::planner::traits::LatentDynamics;

    /// 1-D toy: next = state + action.
    pub struct Shift;

    impl LatentDynamics for Shift {
        fn state_dim(&self) -> usize {
            1
        }
        fn action_dim(&self) -> usize {
            1
        }
        fn predict(&self, state: &Tensor, action: &Tensor) -> Result<Tensor> {
            state.broadcast_zip(action, |s, u| s + u)
        }
    }

    impl DiffLatentDynamics for Shift {
        fn predict_rec(
            &self,
            tape: &mut Tape,
            state: &DualValue,
            action: &DualValue,
        ) -> Result<DualValue> {
            tape.add(state, action)
        }
    }

    /// Sum of squared distances to per-step goals, skipping the start state.
    pub struct StepGoals {
        pub goals: Vec<f64>,
    }

    impl TrajectoryCost for StepGoals {
        fn cost_rec(&self, tape: &mut Tape, states: &[DualValue]) -> Result<DualValue> {
            let mut total: Option<DualValue> = None;
            for (s, g) in states[1..].iter().zip(&self.goals) {
                let d = tape.sub(s, &DualValue::constant_scalar(*g))?;
                let sq = tape.square(&d)?;
                let sq = tape.sum(&sq)?;
                total = Some(match total {
                    None => sq,
                    Some(t) => tape.add(&t, &sq)?,
                });
            }
            total.ok_or_else(|| Error::InvalidInput("empty trajectory".into()))
        }
    }

    #[test]
    fn single_step_matches_closed_form() {
        let cfg = PlannerConfig {
            horizon: 1,
            alpha: 0.1,
            inner_steps: 1,
            ..PlannerConfig::default()
        };
        let cost = StepGoals { goals: vec![1.0] };
        let (u, states) = plan_gradient(&Shift, &cost, &Tensor::scalar(0.0), None, &cfg).unwrap();
        // One step on (z0 + u - 1)^2 from u = 0: u = 2 * alpha * (1 - z0).
        assert!((u.get(0, 0) - 0.2).abs() < 1e-12);
        assert!((states[1].get(0, 0) - 0.2).abs() < 1e-12);
    }

    #[test]
    fn matches_independently_computed_gradient_step() {
        let cfg = PlannerConfig {
            horizon: 3,
            alpha: 0.01,
            inner_steps: 1,
            ..PlannerConfig::default()
        };
        let cost = StepGoals {
            goals: vec![0.7, -0.2, 0.4],
        };
        let s0 = Tensor::scalar(0.3);
        let (u, _) = plan_gradient(&Shift, &cost, &s0, None, &cfg).unwrap();

        let mut tape = Tape::new();
        let u0 = tape.var(Tensor::zeros(1, 3));
        let states = rollout_rec(&mut tape, &Shift, &DualValue::constant(s0), &u0, 3).unwrap();
        let c = cost.cost_rec(&mut tape, &states).unwrap();
        let g = tape.grad(&c, &[&u0]).unwrap().remove(0);
        for t in 0..3 {
            let expect = 0.0 - cfg.alpha * g.get(0, t);
            assert_eq!(u.get(t, 0).to_bits(), expect.to_bits());
        }
    }

    #[test]
    fn converges_to_analytic_minimizer() {
        // C = (u0 - 1)^2 + (u0 + u1)^2 from z0 = 0; normal equations give
        // u* = (1, -1).
        let cfg = PlannerConfig {
            horizon: 2,
            alpha: 0.05,
            inner_steps: 200,
            ..PlannerConfig::default()
        };
        let cost = StepGoals {
            goals: vec![1.0, 0.0],
        };
        let (u, _) = plan_gradient(&Shift, &cost, &Tensor::scalar(0.0), None, &cfg).unwrap();
        let err = ((u.get(0, 0) - 1.0).powi(2) + (u.get(1, 0) + 1.0).powi(2)).sqrt();
        assert!(err < 1e-3, "distance to minimizer {err}");
    }

    struct IgnoreStates;

    impl TrajectoryCost for IgnoreStates {
        fn cost_rec(&self, tape: &mut Tape, _states: &[DualValue]) -> Result<DualValue> {
            Ok(tape.var(Tensor::scalar(5.0)))
        }
    }

    #[test]
    fn zero_gradient_leaves_actions_at_init() {
        let cfg = PlannerConfig {
            horizon: 4,
            ..PlannerConfig::default()
        };
        let (u, _) = plan_gradient(&Shift, &IgnoreStates, &Tensor::scalar(0.0), None, &cfg).unwrap();
        assert!(u.data().iter().all(|&v| v == 0.0));
    }

    struct NanCost;

    impl TrajectoryCost for NanCost {
        fn cost_rec(&self, tape: &mut Tape, _states: &[DualValue]) -> Result<DualValue> {
            Ok(tape.var(Tensor::scalar(f64::NAN)))
        }
    }

    #[test]
    fn non_finite_cost_reports_inner_step() {
        let cfg = PlannerConfig::default();
        let err = plan_gradient(&Shift, &NanCost, &Tensor::scalar(0.0), None, &cfg).unwrap_err();
        match err {
            Error::NonFinite { detail, .. } => {
                assert_eq!(detail.as_deref(), Some("inner step 0"));
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn warm_start_shape_is_checked() {
        let cfg = PlannerConfig {
            horizon: 2,
            ..PlannerConfig::default()
        };
        let bad = Tensor::zeros(3, 1);
        let err = plan_gradient(
            &Shift,
            &StepGoals { goals: vec![0.0, 0.0] },
            &Tensor::scalar(0.0),
            Some(&bad),
            &cfg,
        )
        .unwrap_err();
        assert!(matches!(err, Error::ShapeMismatch { .. }));
    }

    #[test]
    fn returned_actions_respect_bounds() {
        // A goal far outside the reachable band forces a large raw step.
        let cfg = PlannerConfig {
            horizon: 1,
            alpha: 10.0,
            inner_steps: 3,
            ..PlannerConfig::default()
        };
        let cost = StepGoals { goals: vec![50.0] };
        let (u, _) = plan_gradient(&Shift, &cost, &Tensor::scalar(0.0), None, &cfg).unwrap();
        assert!(u.data().iter().all(|&v| (-1.0..=1.0).contains(&v)));
    }
}
