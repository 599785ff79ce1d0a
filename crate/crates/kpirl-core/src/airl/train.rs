//! Adversarial training loop: discriminate expert from policy behavior,
//! read the reward off the discriminator, track values by temporal
//! differences, and improve the policy with value-terminal planning.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{DualValue, Tape, Tensor};
use crate::error::{Error, Result};
use crate::planner::{plan_cem, LatentDynamics, PlannerConfig, TrajectoryCost};
use crate::types::Transition;

use super::nets::{Discriminator, PolicyNet, ValueFn};

/// Weight of the squared pull toward the planner's first action inside
/// the policy update, balancing it against the reward term.
pub const IMITATION_WEIGHT: f64 = 0.5;

const HIDDEN: [usize; 2] = [64, 64];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AirlConfig {
    pub eta_d: f64,
    pub eta_pi: f64,
    pub eta_v: f64,
    pub gamma: f64,
    pub batch: usize,
    pub horizon: usize,
    pub iterations: usize,
    /// Stop early once mean episode reward reaches this value.
    pub reward_threshold: Option<f64>,
    pub seed: u64,
    /// Sampling spread around the policy's own proposal while planning;
    /// this is where exploration enters.
    pub exploration_std: f64,
}

impl Default for AirlConfig {
    fn default() -> Self {
        AirlConfig {
            eta_d: 1e-3,
            eta_pi: 1e-3,
            eta_v: 1e-2,
            gamma: 0.99,
            batch: 64,
            horizon: 10,
            iterations: 200,
            reward_threshold: None,
            seed: 0,
            exploration_std: 0.1,
        }
    }
}

impl AirlConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, rate) in [
            ("discriminator", self.eta_d),
            ("policy", self.eta_pi),
            ("value", self.eta_v),
        ] {
            if !(rate > 0.0) || !rate.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "{name} learning rate must be finite and positive, got {rate}"
                )));
            }
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::InvalidInput(format!(
                "discount must lie in (0, 1), got {}",
                self.gamma
            )));
        }
        if self.batch == 0 {
            return Err(Error::InvalidInput("batch size must be at least 1".into()));
        }
        if self.horizon == 0 {
            return Err(Error::InvalidInput("horizon must be at least 1".into()));
        }
        if !(self.exploration_std > 0.0) {
            return Err(Error::InvalidInput(format!(
                "exploration std must be positive, got {}",
                self.exploration_std
            )));
        }
        Ok(())
    }
}

/// One cross-entropy step on the discriminator: expert pairs labeled 1,
/// policy pairs labeled 0, plain gradient descent. Returns the loss
/// before the step.
pub fn discriminator_update(
    d: &mut Discriminator,
    expert_states: &Tensor,
    expert_actions: &Tensor,
    policy_states: &Tensor,
    policy_actions: &Tensor,
    eta_d: f64,
) -> Result<f64> {
    if expert_states.rows() == 0 || policy_states.rows() == 0 {
        return Err(Error::InvalidInput(
            "discriminator update needs non-empty expert and policy batches".into(),
        ));
    }
    let mut tape = Tape::new();
    let nodes = d.mlp.record(&mut tape);

    let le = d.logits_rec(
        &mut tape,
        &DualValue::constant(expert_states.clone()),
        &DualValue::constant(expert_actions.clone()),
        &nodes,
    )?;
    let lp = d.logits_rec(
        &mut tape,
        &DualValue::constant(policy_states.clone()),
        &DualValue::constant(policy_actions.clone()),
        &nodes,
    )?;

    let pe = tape.sigmoid(&le)?;
    let log_pe = tape.log(&pe)?;
    let pp = tape.sigmoid(&lp)?;
    let ones = DualValue::constant(Tensor::ones(pp.value().rows(), 1));
    let one_minus = tape.sub(&ones, &pp)?;
    let log_np = tape.log(&one_minus)?;
    let me = tape.mean(&log_pe)?;
    let mp = tape.mean(&log_np)?;
    let s = tape.add(&me, &mp)?;
    let loss = tape.scale(&s, -1.0)?;
    let value = loss.scalar()?;
    if !value.is_finite() {
        return Err(Error::non_finite("discriminator loss"));
    }
    let inputs = nodes.all();
    let grads = tape.grad(&loss, &inputs)?;
    d.mlp.apply_update(&grads, eta_d)?;
    Ok(value)
}

/// One temporal-difference step on the value function. The target
/// r + gamma V(s') is held fixed; only V(s) is differentiated, so this is
/// the semi-gradient rule exactly. Returns the TD error.
pub fn value_td_update(
    v: &mut ValueFn,
    state: &Tensor,
    action: &Tensor,
    next_state: &Tensor,
    d: &Discriminator,
    gamma: f64,
    eta_v: f64,
) -> Result<f64> {
    let r = d.reward(state, action)?;
    let target = r + gamma * v.value(next_state)?;
    let mut tape = Tape::new();
    let nodes = v.mlp.record(&mut tape);
    let vs = v.value_rec(&mut tape, &DualValue::constant(state.clone()), &nodes)?;
    let delta = target - vs.scalar()?;
    if !delta.is_finite() {
        return Err(Error::non_finite("temporal difference error"));
    }
    let inputs = nodes.all();
    let grads = tape.grad(&vs, &inputs)?;
    v.mlp.apply_update(&grads, -eta_v * delta)?;
    Ok(delta)
}

/// Planning objective: negated discounted reward along the rollout plus
/// the negated discounted terminal value. Only the sampling planner can
/// evaluate it, because the reward reads the actions.
struct PlanObjective<'a> {
    d: &'a Discriminator,
    v: &'a ValueFn,
    gamma: f64,
}

impl TrajectoryCost for PlanObjective<'_> {
    fn cost_rec(&self, _tape: &mut Tape, _states: &[DualValue]) -> Result<DualValue> {
        Err(Error::InvalidInput(
            "the adversarial planning objective needs the action sequence; \
             evaluate it through cost_with_actions"
                .into(),
        ))
    }

    fn cost_with_actions(&self, states: &[Tensor], actions: &Tensor) -> Result<f64> {
        let h = actions.rows();
        if states.len() != h + 1 {
            return Err(Error::shape(
                "planning objective rollout",
                format!("{} states", h + 1),
                format!("{}", states.len()),
            ));
        }
        let mut total = 0.0;
        let mut discount = 1.0;
        for t in 0..h {
            let a = Tensor::row(actions.row_slice(t).to_vec());
            total -= discount * self.d.reward(&states[t], &a)?;
            discount *= self.gamma;
        }
        total -= discount * self.v.value(&states[h])?;
        Ok(total)
    }
}

/// One planned rollout: `horizon + 1` state rows and the action matrix
/// that produced them.
#[derive(Debug, Clone)]
pub struct PlannedEpisode {
    pub states: Vec<Tensor>,
    pub actions: Tensor,
}

impl PlannedEpisode {
    pub fn action_row(&self, t: usize) -> Tensor {
        Tensor::row(self.actions.row_slice(t).to_vec())
    }

    /// Undiscounted sum of rewards along the episode under `d`.
    pub fn episode_reward(&self, d: &Discriminator) -> Result<f64> {
        let mut total = 0.0;
        for t in 0..self.actions.rows() {
            total += d.reward(&self.states[t], &self.action_row(t))?;
        }
        Ok(total)
    }
}

/// Plans one episode per start state: sampling search over the reward
/// plus terminal value, centered on the policy's own proposal.
pub fn plan_episodes<D: LatentDynamics + ?Sized>(
    pi: &PolicyNet,
    d: &Discriminator,
    v: &ValueFn,
    dynamics: &D,
    starts: &[Tensor],
    cfg: &AirlConfig,
    seed: u64,
) -> Result<Vec<PlannedEpisode>> {
    let objective = PlanObjective {
        d,
        v,
        gamma: cfg.gamma,
    };
    let mut episodes = Vec::with_capacity(starts.len());
    for (e, s0) in starts.iter().enumerate() {
        let mut proposal = Vec::with_capacity(cfg.horizon * dynamics.action_dim());
        let mut s = s0.clone();
        for _ in 0..cfg.horizon {
            let a = pi.act(&s)?;
            proposal.extend_from_slice(a.data());
            s = dynamics.predict(&s, &a)?;
        }
        let warm = Tensor::new(cfg.horizon, dynamics.action_dim(), proposal)?;
        let pcfg = PlannerConfig {
            horizon: cfg.horizon,
            init_std: cfg.exploration_std,
            action_low: pi.action_low,
            action_high: pi.action_high,
            seed: seed.wrapping_add(e as u64),
            ..PlannerConfig::default()
        };
        let (actions, states, _) = plan_cem(dynamics, &objective, s0, Some(&warm), &pcfg)?;
        episodes.push(PlannedEpisode { states, actions });
    }
    Ok(episodes)
}

/// Plans from every start state, then improves the policy: descend the
/// negated mean reward of the policy's own actions at the planned states
/// and pull the policy toward the planner's first actions. Returns the
/// planned episodes for reuse as training data.
pub fn policy_update_tdmpc<D: LatentDynamics + ?Sized>(
    pi: &mut PolicyNet,
    d: &Discriminator,
    v: &ValueFn,
    dynamics: &D,
    starts: &[Tensor],
    cfg: &AirlConfig,
    seed: u64,
) -> Result<Vec<PlannedEpisode>> {
    if starts.is_empty() {
        return Err(Error::InvalidInput(
            "policy update needs at least one start state".into(),
        ));
    }
    if !(cfg.eta_pi >= 0.0) || !cfg.eta_pi.is_finite() {
        return Err(Error::InvalidInput(format!(
            "policy learning rate must be finite and nonnegative, got {}",
            cfg.eta_pi
        )));
    }
    let episodes = plan_episodes(pi, d, v, dynamics, starts, cfg, seed)?;

    let mut visited = Vec::new();
    for ep in &episodes {
        for t in 0..cfg.horizon {
            visited.push(ep.states[t].data().to_vec());
        }
    }
    let visited = Tensor::from_rows(&visited)?;
    let firsts: Vec<Vec<f64>> = episodes
        .iter()
        .map(|ep| ep.actions.row_slice(0).to_vec())
        .collect();
    let firsts = Tensor::from_rows(&firsts)?;
    let start_rows: Vec<Vec<f64>> = starts.iter().map(|s| s.data().to_vec()).collect();
    let start_rows = Tensor::from_rows(&start_rows)?;

    let mut tape = Tape::new();
    let nodes = pi.mlp.record(&mut tape);
    let s_batch = DualValue::constant(visited);
    let a_batch = pi.act_rec(&mut tape, &s_batch, &nodes)?;
    let r = d.reward_rec(&mut tape, &s_batch, &a_batch)?;
    let mean_r = tape.mean(&r)?;
    let reward_loss = tape.scale(&mean_r, -1.0)?;

    let a0 = pi.act_rec(&mut tape, &DualValue::constant(start_rows), &nodes)?;
    let diff = tape.sub(&a0, &DualValue::constant(firsts))?;
    let sq = tape.square(&diff)?;
    let msq = tape.mean(&sq)?;
    let imitation = tape.scale(&msq, IMITATION_WEIGHT)?;

    let loss = tape.add(&reward_loss, &imitation)?;
    if !loss.value().is_finite() {
        return Err(Error::non_finite("policy loss"));
    }
    let inputs = nodes.all();
    let grads = tape.grad(&loss, &inputs)?;
    pi.mlp.apply_update(&grads, cfg.eta_pi)?;
    Ok(episodes)
}

/// Everything a finished adversarial run produces: the three networks
/// and one curve point per iteration.
#[derive(Debug, Clone)]
pub struct AirlRun {
    pub policy: PolicyNet,
    pub discriminator: Discriminator,
    pub value: ValueFn,
    pub disc_loss: Vec<f64>,
    pub mean_episode_reward: Vec<f64>,
    pub mean_abs_td: Vec<f64>,
}

fn at_iteration(err: Error, iteration: usize) -> Error {
    match err {
        Error::NonFinite { context, detail } => Error::NonFinite {
            context,
            detail: Some(match detail {
                Some(d) => format!("iteration {iteration}, {d}"),
                None => format!("iteration {iteration}"),
            }),
        },
        other => other,
    }
}

/// Full adversarial loop over expert transitions. Per iteration: train
/// the discriminator on buffered policy episodes against an expert
/// sample, refresh values over those episodes' transitions, then plan
/// from new starts and update the policy, keeping the fresh episodes as
/// the next iteration's buffer. Start states are drawn from the expert's
/// visited states.
pub fn airl_train<D: LatentDynamics + ?Sized>(
    expert: &[Transition],
    dynamics: &D,
    cfg: &AirlConfig,
) -> Result<AirlRun> {
    cfg.validate()?;
    if expert.is_empty() {
        return Err(Error::InvalidInput(
            "adversarial training needs expert transitions".into(),
        ));
    }
    let state_dim = expert[0].state.dim();
    let action_dim = expert[0].action.len();
    if state_dim != dynamics.state_dim() || action_dim != dynamics.action_dim() {
        return Err(Error::shape(
            "expert transitions",
            format!("{}d states, {}d actions", dynamics.state_dim(), dynamics.action_dim()),
            format!("{state_dim}d states, {action_dim}d actions"),
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut d = Discriminator::init(state_dim, action_dim, &HIDDEN, &mut rng)?;
    let mut v = ValueFn::init(state_dim, &HIDDEN, &mut rng)?;
    let mut pi = PolicyNet::init(state_dim, action_dim, &HIDDEN, (-1.0, 1.0), &mut rng)?;

    let mut run = AirlRun {
        policy: pi.clone(),
        discriminator: d.clone(),
        value: v.clone(),
        disc_loss: Vec::new(),
        mean_episode_reward: Vec::new(),
        mean_abs_td: Vec::new(),
    };
    if cfg.iterations == 0 {
        return Ok(run);
    }

    let episodes_per_iter = cfg.batch.div_ceil(cfg.horizon).max(1);
    let mut buffer: Vec<PlannedEpisode> = Vec::new();

    for it in 0..cfg.iterations {
        let starts: Vec<Tensor> = (0..episodes_per_iter)
            .map(|_| expert[rng.gen_range(0..expert.len())].state.to_row())
            .collect();
        let plan_seed: u64 = rng.gen();

        if buffer.is_empty() {
            buffer = plan_episodes(&pi, &d, &v, dynamics, &starts, cfg, plan_seed)
                .map_err(|e| at_iteration(e, it))?;
        }

        let mut expert_s = Vec::with_capacity(cfg.batch);
        let mut expert_a = Vec::with_capacity(cfg.batch);
        for _ in 0..cfg.batch {
            let tr = &expert[rng.gen_range(0..expert.len())];
            expert_s.push(tr.state.to_row().data().to_vec());
            expert_a.push(tr.action.clone());
        }
        let expert_s = Tensor::from_rows(&expert_s)?;
        let expert_a = Tensor::from_rows(&expert_a)?;

        let mut policy_s = Vec::new();
        let mut policy_a = Vec::new();
        for ep in &buffer {
            for t in 0..cfg.horizon {
                policy_s.push(ep.states[t].data().to_vec());
                policy_a.push(ep.actions.row_slice(t).to_vec());
            }
        }
        let policy_s = Tensor::from_rows(&policy_s)?;
        let policy_a = Tensor::from_rows(&policy_a)?;

        let disc_loss =
            discriminator_update(&mut d, &expert_s, &expert_a, &policy_s, &policy_a, cfg.eta_d)
                .map_err(|e| at_iteration(e, it))?;

        let mut abs_td = 0.0;
        let mut td_count = 0usize;
        for ep in &buffer {
            for t in 0..cfg.horizon {
                let delta = value_td_update(
                    &mut v,
                    &ep.states[t],
                    &ep.action_row(t),
                    &ep.states[t + 1],
                    &d,
                    cfg.gamma,
                    cfg.eta_v,
                )
                .map_err(|e| at_iteration(e, it))?;
                abs_td += delta.abs();
                td_count += 1;
            }
        }

        let fresh = policy_update_tdmpc(&mut pi, &d, &v, dynamics, &starts, cfg, plan_seed)
            .map_err(|e| at_iteration(e, it))?;

        let mean_reward = fresh
            .iter()
            .map(|ep| ep.episode_reward(&d))
            .sum::<Result<f64>>()?
            / fresh.len() as f64;
        buffer = fresh;

        run.disc_loss.push(disc_loss);
        run.mean_episode_reward.push(mean_reward);
        run.mean_abs_td.push(abs_td / td_count as f64);

        if let Some(threshold) = cfg.reward_threshold {
            if mean_reward >= threshold {
                break;
            }
        }
    }

    run.policy = pi;
    run.discriminator = d;
    run.value = v;
    Ok(run)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::LN_2;

    use crate::types::{Keypoint, KeypointFrame, LatentState};

    struct Still {
        dim: usize,
        actions: usize,
    }

    impl LatentDynamics for Still {
        fn state_dim(&self) -> usize {
            self.dim
        }
        fn action_dim(&self) -> usize {
            self.actions
        }
        fn predict(&self, state: &Tensor, _action: &Tensor) -> Result<Tensor> {
            Ok(state.clone())
        }
    }

    struct Push;

    impl LatentDynamics for Push {
        fn state_dim(&self) -> usize {
            5
        }
        fn action_dim(&self) -> usize {
            2
        }
        fn predict(&self, state: &Tensor, action: &Tensor) -> Result<Tensor> {
            let mut d = state.data().to_vec();
            d[0] += action.get(0, 0);
            d[1] += action.get(0, 1);
            Ok(Tensor::row(d))
        }
    }

    fn state5(x: f64, y: f64) -> LatentState {
        LatentState::new(
            KeypointFrame::new(vec![Keypoint::new(x, y, 1.0)]),
            vec![0.2],
            vec![0.0],
        )
        .unwrap()
    }

    fn walk_transitions() -> Vec<Transition> {
        (0..10)
            .map(|i| {
                let x = 0.1 * i as f64;
                Transition {
                    state: state5(x, 0.5),
                    action: vec![0.1, 0.0],
                    next_state: state5(x + 0.1, 0.5),
                }
            })
            .collect()
    }

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn batch(rows: Vec<Vec<f64>>) -> Tensor {
        Tensor::from_rows(&rows).unwrap()
    }

    #[test]
    fn fresh_discriminator_loss_is_two_log_two() {
        let mut d = Discriminator::init(2, 1, &[8], &mut rng(0)).unwrap();
        let loss = discriminator_update(
            &mut d,
            &batch(vec![vec![0.3, -0.1], vec![0.8, 0.2]]),
            &batch(vec![vec![0.5], vec![-0.5]]),
            &batch(vec![vec![-0.3, 0.9]]),
            &batch(vec![vec![0.1]]),
            0.3,
        )
        .unwrap();
        assert!((loss - 2.0 * LN_2).abs() < 1e-12, "loss {loss}");
    }

    #[test]
    fn zero_rate_leaves_discriminator_unchanged() {
        let mut d = Discriminator::init(2, 1, &[8], &mut rng(1)).unwrap();
        for w in d.mlp.weights.iter_mut() {
            for v in w.data_mut() {
                *v += 0.05;
            }
        }
        let before = d.mlp.clone();
        discriminator_update(
            &mut d,
            &batch(vec![vec![0.3, -0.1]]),
            &batch(vec![vec![0.5]]),
            &batch(vec![vec![-0.3, 0.9]]),
            &batch(vec![vec![0.1]]),
            0.0,
        )
        .unwrap();
        assert_eq!(d.mlp, before);
    }

    #[test]
    fn discriminator_separates_separable_pairs() {
        let mut d = Discriminator::init(2, 1, &[8], &mut rng(2)).unwrap();
        let expert_s: Vec<Vec<f64>> =
            (0..8).map(|i| vec![0.7 + 0.01 * i as f64, 0.5]).collect();
        let expert_a = vec![vec![0.5]; 8];
        let policy_s: Vec<Vec<f64>> =
            (0..8).map(|i| vec![-0.6 - 0.01 * i as f64, -0.4]).collect();
        let policy_a = vec![vec![-0.5]; 8];
        let (es, ea) = (batch(expert_s.clone()), batch(expert_a.clone()));
        let (ps, pa) = (batch(policy_s.clone()), batch(policy_a.clone()));

        let first = discriminator_update(&mut d, &es, &ea, &ps, &pa, 0.2).unwrap();
        let mut last = first;
        for _ in 0..300 {
            last = discriminator_update(&mut d, &es, &ea, &ps, &pa, 0.2).unwrap();
        }
        assert!(last < first);
        for (s, a) in expert_s.iter().zip(&expert_a) {
            let p = d.prob(&Tensor::row(s.clone()), &Tensor::row(a.clone())).unwrap();
            assert!(p > 0.5, "expert pair scored {p}");
        }
        for (s, a) in policy_s.iter().zip(&policy_a) {
            let p = d.prob(&Tensor::row(s.clone()), &Tensor::row(a.clone())).unwrap();
            assert!(p < 0.5, "policy pair scored {p}");
        }
    }

    /// Discriminator that ignores the state and scores r(a) =
    /// tanh(k(a - peak) + 1) - tanh(k(a - peak) - 1), maximized at `peak`.
    fn peaked_reward_disc(peak: f64, k: f64) -> Discriminator {
        let mut d = Discriminator::init(2, 1, &[2], &mut rng(3)).unwrap();
        d.mlp.weights[0].data_mut().copy_from_slice(&[0.0, 0.0, 0.0, 0.0, k, k]);
        d.mlp.biases[0]
            .data_mut()
            .copy_from_slice(&[-k * peak + 1.0, -k * peak - 1.0]);
        d.mlp.weights[1].data_mut().copy_from_slice(&[1.0, -1.0]);
        d.mlp.biases[1].data_mut().copy_from_slice(&[0.0]);
        d
    }

    /// Discriminator with a zeroed body and a fixed output bias, so the
    /// reward is a constant everywhere.
    fn constant_reward_disc(r: f64) -> Discriminator {
        let mut d = Discriminator::init(2, 1, &[2], &mut rng(4)).unwrap();
        d.mlp.biases[1].data_mut().copy_from_slice(&[r]);
        d
    }

    #[test]
    fn cold_start_td_error_is_the_reward() {
        let d = constant_reward_disc(1.0);
        let mut v = ValueFn::init(2, &[8], &mut rng(5)).unwrap();
        let s = Tensor::row(vec![0.3, -0.2]);
        let a = Tensor::row(vec![0.1]);
        let delta = value_td_update(&mut v, &s, &a, &s, &d, 0.5, 0.1).unwrap();
        assert_eq!(delta, 1.0);
    }

    #[test]
    fn value_iteration_reaches_the_discounted_fixed_point() {
        let d = constant_reward_disc(1.0);
        let mut v = ValueFn::init(2, &[8], &mut rng(6)).unwrap();
        let s = Tensor::row(vec![0.3, -0.2]);
        let a = Tensor::row(vec![0.1]);
        for _ in 0..2000 {
            value_td_update(&mut v, &s, &a, &s, &d, 0.5, 0.05).unwrap();
        }
        let fixed = 1.0 / (1.0 - 0.5);
        assert!((v.value(&s).unwrap() - fixed).abs() < 1e-3);
    }

    #[test]
    fn zero_rate_leaves_value_unchanged() {
        let d = constant_reward_disc(0.7);
        let mut v = ValueFn::init(2, &[8], &mut rng(7)).unwrap();
        for w in v.mlp.weights.iter_mut() {
            for x in w.data_mut() {
                *x += 0.03;
            }
        }
        let before = v.mlp.clone();
        let s = Tensor::row(vec![0.3, -0.2]);
        let s2 = Tensor::row(vec![0.1, 0.4]);
        let a = Tensor::row(vec![0.1]);
        let delta = value_td_update(&mut v, &s, &a, &s2, &d, 0.9, 0.0).unwrap();
        assert_eq!(v.mlp, before);
        let manual = d.reward(&s, &a).unwrap() + 0.9 * v.value(&s2).unwrap()
            - v.value(&s).unwrap();
        assert!((delta - manual).abs() < 1e-12);
    }

    #[test]
    fn td_step_is_exactly_the_scaled_gradient() {
        let d = peaked_reward_disc(0.3, 2.0);
        let mut v = ValueFn::init(2, &[8], &mut rng(8)).unwrap();
        for w in v.mlp.weights.iter_mut() {
            for x in w.data_mut() {
                *x += 0.04;
            }
        }
        let s = Tensor::row(vec![0.3, -0.2]);
        let s2 = Tensor::row(vec![0.1, 0.4]);
        let a = Tensor::row(vec![0.1]);
        let eta = 0.07;

        let mut expected = v.mlp.clone();
        let mut tape = Tape::new();
        let nodes = expected.record(&mut tape);
        let vs = v
            .value_rec(&mut tape, &DualValue::constant(s.clone()), &nodes)
            .unwrap();
        let grads = tape.grad(&vs, &nodes.all()).unwrap();

        let delta = value_td_update(&mut v, &s, &a, &s2, &d, 0.9, eta).unwrap();
        expected.apply_update(&grads, -eta * delta).unwrap();
        assert_eq!(v.mlp, expected);
    }

    #[test]
    fn policy_update_with_flat_reward_imitates_the_planner() {
        let dynamics = Still { dim: 2, actions: 1 };
        let d = Discriminator::init(2, 1, &[8], &mut rng(9)).unwrap();
        let v = ValueFn::init(2, &[8], &mut rng(10)).unwrap();
        let mut pi = PolicyNet::init(2, 1, &[8], (-1.0, 1.0), &mut rng(11)).unwrap();
        let s0 = Tensor::row(vec![0.2, -0.4]);
        let cfg = AirlConfig {
            eta_pi: 0.05,
            horizon: 3,
            ..AirlConfig::default()
        };

        let before = pi.act(&s0).unwrap().get(0, 0);
        let eps =
            policy_update_tdmpc(&mut pi, &d, &v, &dynamics, &[s0.clone()], &cfg, 7).unwrap();
        let target = eps[0].actions.get(0, 0);
        let after = pi.act(&s0).unwrap().get(0, 0);
        assert_eq!(before, 0.0);
        assert!((after - target).abs() < (before - target).abs());
    }

    #[test]
    fn policy_climbs_to_the_reward_peak() {
        let dynamics = Still { dim: 2, actions: 1 };
        let d = peaked_reward_disc(0.3, 2.0);
        let v = ValueFn::init(2, &[8], &mut rng(12)).unwrap();
        let mut pi = PolicyNet::init(2, 1, &[8], (-1.0, 1.0), &mut rng(13)).unwrap();
        let s0 = Tensor::row(vec![0.2, -0.4]);
        let cfg = AirlConfig {
            eta_pi: 0.05,
            horizon: 3,
            ..AirlConfig::default()
        };
        for it in 0..120 {
            policy_update_tdmpc(&mut pi, &d, &v, &dynamics, &[s0.clone()], &cfg, it).unwrap();
        }
        let a = pi.act(&s0).unwrap().get(0, 0);
        assert!((a - 0.3).abs() < 0.05, "policy action {a}");
    }

    #[test]
    fn planning_is_deterministic_in_the_seed() {
        let dynamics = Still { dim: 2, actions: 1 };
        let d = peaked_reward_disc(0.1, 1.0);
        let v = ValueFn::init(2, &[8], &mut rng(14)).unwrap();
        let pi = PolicyNet::init(2, 1, &[8], (-1.0, 1.0), &mut rng(15)).unwrap();
        let starts = [Tensor::row(vec![0.2, -0.4]), Tensor::row(vec![-0.1, 0.6])];
        let cfg = AirlConfig::default();

        let a = plan_episodes(&pi, &d, &v, &dynamics, &starts, &cfg, 21).unwrap();
        let b = plan_episodes(&pi, &d, &v, &dynamics, &starts, &cfg, 21).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.actions, y.actions);
        }
    }

    #[test]
    fn trainer_rejects_empty_or_mismatched_input() {
        let cfg = AirlConfig::default();
        assert!(airl_train(&[], &Push, &cfg).is_err());
        let wrong = Still { dim: 4, actions: 2 };
        assert!(airl_train(&walk_transitions(), &wrong, &cfg).is_err());
    }

    #[test]
    fn zero_iterations_returns_fresh_networks_and_empty_curves() {
        let cfg = AirlConfig {
            iterations: 0,
            ..AirlConfig::default()
        };
        let run = airl_train(&walk_transitions(), &Push, &cfg).unwrap();
        assert!(run.disc_loss.is_empty());
        assert!(run.mean_episode_reward.is_empty());
        assert!(run.mean_abs_td.is_empty());
        assert_eq!(run.discriminator.prob(
            &Tensor::row(vec![0.0; 5]),
            &Tensor::row(vec![0.0; 2]),
        ).unwrap(), 0.5);
    }

    fn tiny_cfg() -> AirlConfig {
        AirlConfig {
            batch: 4,
            horizon: 2,
            iterations: 3,
            ..AirlConfig::default()
        }
    }

    #[test]
    fn same_seed_runs_are_identical() {
        let expert = walk_transitions();
        let a = airl_train(&expert, &Push, &tiny_cfg()).unwrap();
        let b = airl_train(&expert, &Push, &tiny_cfg()).unwrap();
        assert_eq!(a.disc_loss, b.disc_loss);
        assert_eq!(a.mean_episode_reward, b.mean_episode_reward);
        assert_eq!(a.mean_abs_td, b.mean_abs_td);
        assert_eq!(a.policy.mlp, b.policy.mlp);
    }

    #[test]
    fn short_run_produces_finite_curves() {
        let run = airl_train(&walk_transitions(), &Push, &tiny_cfg()).unwrap();
        assert_eq!(run.disc_loss.len(), 3);
        assert_eq!(run.mean_episode_reward.len(), 3);
        assert_eq!(run.mean_abs_td.len(), 3);
        assert!((run.disc_loss[0] - 2.0 * LN_2).abs() < 1e-12);
        for c in [&run.disc_loss, &run.mean_episode_reward, &run.mean_abs_td] {
            assert!(c.iter().all(|x| x.is_finite()));
        }
    }

    #[test]
    fn reward_threshold_stops_early() {
        let cfg = AirlConfig {
            reward_threshold: Some(-1e6),
            ..tiny_cfg()
        };
        let run = airl_train(&walk_transitions(), &Push, &cfg).unwrap();
        assert_eq!(run.disc_loss.len(), 1);
    }

    #[test]
    fn config_validation_catches_bad_fields() {
        let good = AirlConfig::default();
        assert!(good.validate().is_ok());
        for bad in [
            AirlConfig { eta_d: 0.0, ..good.clone() },
            AirlConfig { eta_pi: -1.0, ..good.clone() },
            AirlConfig { eta_v: f64::NAN, ..good.clone() },
            AirlConfig { gamma: 1.0, ..good.clone() },
            AirlConfig { batch: 0, ..good.clone() },
            AirlConfig { horizon: 0, ..good.clone() },
            AirlConfig { exploration_std: 0.0, ..good.clone() },
        ] {
            assert!(bad.validate().is_err());
        }
    }
}
