//! Supervised training of the residual dynamics model.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{DualValue, Tape, Tensor};
use crate::dynamics::model::{DynModel, NormStats};
use crate::error::{Error, Result};
use crate::types::Transition;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DynTrainConfig {
    pub hidden: Vec<usize>,
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub val_fraction: f64,
    pub seed: u64,
}

impl Default for DynTrainConfig {
    fn default() -> Self {
        DynTrainConfig {
            hidden: vec![64, 64],
            lr: 1e-3,
            batch_size: 64,
            epochs: 200,
            val_fraction: 0.1,
            seed: 0,
        }
    }
}

/// Per-epoch mean squared error on the raw next-state scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynTrainReport {
    pub train_mse: Vec<f64>,
    pub val_mse: Vec<f64>,
}

/// Shortest angular difference, used for joint-angle target deltas so a
/// transition that wraps past pi trains on the small physical rotation
/// instead of a 2 pi jump.
fn angular_diff(next: f64, prev: f64) -> f64 {
    use std::f64::consts::PI;
    let d = next - prev;
    if (-PI..PI).contains(&d) {
        d
    } else {
        (d + PI).rem_euclid(2.0 * PI) - PI
    }
}

struct Prepared {
    inputs: Vec<Vec<f64>>,
    /// Raw-scale regression target: state + wrap-aware delta.
    targets: Vec<Vec<f64>>,
    states: Vec<Vec<f64>>,
    actions: Vec<Vec<f64>>,
}

fn prepare(transitions: &[Transition]) -> Result<Prepared> {
    let first = transitions
        .first()
        .ok_or_else(|| Error::InvalidInput("no transitions to train on".into()))?;
    let layout = first.state.layout();
    let action_dim = first.action.len();
    let mut p = Prepared {
        inputs: Vec::with_capacity(transitions.len()),
        targets: Vec::with_capacity(transitions.len()),
        states: Vec::with_capacity(transitions.len()),
        actions: Vec::with_capacity(transitions.len()),
    };
    let q_range = layout.q_range();
    for (i, t) in transitions.iter().enumerate() {
        if t.state.layout() != layout || t.next_state.layout() != layout {
            return Err(Error::InvalidInput(format!("transition {i} has inconsistent state shape")));
        }
        if t.action.len() != action_dim {
            return Err(Error::InvalidInput(format!("transition {i} has inconsistent action size")));
        }
        let s = t.state.to_row();
        let sn = t.next_state.to_row();
        if !s.is_finite() || !sn.is_finite() || !t.action.iter().all(|a| a.is_finite()) {
            return Err(Error::InvalidInput(format!("transition {i} contains non-finite values")));
        }
        let mut input = s.data().to_vec();
        input.extend_from_slice(&t.action);
        let target: Vec<f64> = s
            .data()
            .iter()
            .zip(sn.data())
            .enumerate()
            .map(|(c, (&a, &b))| {
                if q_range.contains(&c) {
                    a + angular_diff(b, a)
                } else {
                    b
                }
            })
            .collect();
        p.states.push(s.data().to_vec());
        p.actions.push(t.action.clone());
        p.inputs.push(input);
        p.targets.push(target);
    }
    Ok(p)
}

/// Fits a dynamics model by minimizing mean squared error between the
/// predicted and true next state with Adam. Returns the model and the
/// per-epoch loss curves; a non-finite loss aborts with the epoch number.
pub fn train_dynamics(
    transitions: &[Transition],
    cfg: &DynTrainConfig,
) -> Result<(DynModel, DynTrainReport)> {
    if cfg.batch_size == 0 {
        return Err(Error::InvalidInput("batch_size must be positive".into()));
    }
    if !(0.0 < cfg.val_fraction && cfg.val_fraction < 1.0) {
        return Err(Error::InvalidInput(format!(
            "val_fraction {} outside (0, 1)",
            cfg.val_fraction
        )));
    }
    let prep = prepare(transitions)?;
    let n = prep.inputs.len();
    let layout = transitions[0].state.layout();
    let action_dim = transitions[0].action.len();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let val_n = ((n as f64 * cfg.val_fraction).round() as usize).clamp(1, n.saturating_sub(1).max(1));
    let (val_idx, train_idx) = order.split_at(val_n);
    if train_idx.is_empty() {
        return Err(Error::InvalidInput(format!(
            "{n} transitions leave no training data at val_fraction {}",
            cfg.val_fraction
        )));
    }

    let mut model = DynModel::init(layout, action_dim, &cfg.hidden, &mut rng)?;
    let gather = |rows: &[Vec<f64>], idx: &[usize]| -> Tensor {
        Tensor::from_rows(&idx.iter().map(|&i| rows[i].clone()).collect::<Vec<_>>()).unwrap()
    };
    model.input_norm = NormStats::fit(&gather(&prep.inputs, train_idx));
    let train_deltas: Vec<Vec<f64>> = train_idx
        .iter()
        .map(|&i| {
            prep.targets[i]
                .iter()
                .zip(&prep.states[i])
                .map(|(t, s)| t - s)
                .collect()
        })
        .collect();
    model.delta_norm = NormStats::fit(&Tensor::from_rows(&train_deltas)?);

    let mut opt = crate::mlp::Adam::new(&model.mlp, cfg.lr);
    let mut report = DynTrainReport {
        train_mse: Vec::with_capacity(cfg.epochs),
        val_mse: Vec::with_capacity(cfg.epochs),
    };
    let val_states = gather(&prep.states, val_idx);
    let val_actions = gather(&prep.actions, val_idx);
    let val_targets = gather(&prep.targets, val_idx);

    let mut shuffled: Vec<usize> = train_idx.to_vec();
    for epoch in 0..cfg.epochs {
        shuffled.shuffle(&mut rng);
        let mut epoch_loss = 0.0f64;
        let mut batches = 0.0f64;
        for chunk in shuffled.chunks(cfg.batch_size) {
            let s = gather(&prep.states, chunk);
            let a = gather(&prep.actions, chunk);
            let y = gather(&prep.targets, chunk);

            let mut tape = Tape::new();
            let params = model.mlp.record(&mut tape);
            let sn = DualValue::constant(s);
            let an = DualValue::constant(a);
            let pred = model.predict_rec(&mut tape, &sn, &an, &params)?;
            let err = tape.sub(&pred, &DualValue::constant(y))?;
            let sq = tape.square(&err)?;
            let loss = tape.mean(&sq)?;
            let loss_v = loss.scalar()?;
            if !loss_v.is_finite() {
                return Err(Error::non_finite_at("dynamics training loss", format!("epoch {epoch}")));
            }
            epoch_loss += loss_v;
            batches += 1.0;
            let roots = params.all();
            let grads = tape.grad(&loss, &roots)?;
            opt.step(&mut model.mlp, &grads)?;
        }
        report.train_mse.push(epoch_loss / batches.max(1.0));

        let val_pred = model.predict(&val_states, &val_actions)?;
        let val_mse = val_pred
            .broadcast_zip(&val_targets, |p, t| (p - t) * (p - t))?
            .mean();
        if !val_mse.is_finite() {
            return Err(Error::non_finite_at("dynamics validation loss", format!("epoch {epoch}")));
        }
        report.val_mse.push(val_mse);
    }
    Ok((model, report))
}

/// Moving-average smoothing used when judging loss trends.
pub fn smooth(values: &[f64], window: usize) -> Vec<f64> {
    if values.is_empty() || window == 0 {
        return values.to_vec();
    }
    let mut out = Vec::with_capacity(values.len());
    for i in 0..values.len() {
        let lo = i.saturating_sub(window - 1);
        let s: f64 = values[lo..=i].iter().sum();
        out.push(s / (i - lo + 1) as f64);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{KeypointFrame, LatentState};

    /// Identity-dynamics transitions: next state equals state.
    fn identity_transitions(n: usize) -> Vec<Transition> {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        use rand::Rng;
        (0..n)
            .map(|_| {
                // Coordinate channels roam; intensities stay valid in [0, 1].
                let mut flat: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
                flat.extend((0..2).map(|_| rng.gen_range(0.0..1.0)));
                let frame = KeypointFrame::from_flat(&flat).unwrap();
                let s = LatentState::new(frame, vec![rng.gen_range(-1.0..1.0)], vec![0.0]).unwrap();
                Transition {
                    state: s.clone(),
                    action: vec![rng.gen_range(-1.0..1.0)],
                    next_state: s,
                }
            })
            .collect()
    }

    #[test]
    fn learns_identity_quickly() {
        let data = identity_transitions(256);
        let cfg = DynTrainConfig {
            hidden: vec![16],
            epochs: 30,
            batch_size: 32,
            lr: 3e-3,
            val_fraction: 0.2,
            seed: 1,
        };
        let (_, report) = train_dynamics(&data, &cfg).unwrap();
        let last = *report.val_mse.last().unwrap();
        assert!(last < 1e-6, "val mse {last}");
    }

    /// Transitions whose state change is proportional to the action, which
    /// normalization alone cannot absorb; the network has to learn it, so
    /// the loss starts high and falls.
    fn drift_transitions(n: usize) -> Vec<Transition> {
        identity_transitions(n)
            .into_iter()
            .map(|mut t| {
                let a = t.action[0];
                let mut next = t.state.clone();
                for kp in &mut next.frame.keypoints {
                    kp.x += 0.3 * a;
                    kp.y -= 0.2 * a;
                }
                next.q[0] += 0.1 * a;
                t.next_state = next;
                t
            })
            .collect()
    }

    #[test]
    fn loss_curve_trends_down() {
        let data = drift_transitions(256);
        let cfg = DynTrainConfig {
            hidden: vec![16],
            epochs: 24,
            batch_size: 32,
            lr: 3e-3,
            val_fraction: 0.2,
            seed: 3,
        };
        let (_, report) = train_dynamics(&data, &cfg).unwrap();
        let s = smooth(&report.train_mse, 10);
        for w in s.windows(2) {
            assert!(w[1] <= w[0] * 1.05, "smoothed loss rose: {} -> {}", w[0], w[1]);
        }
        assert!(s.last().unwrap() < &(0.5 * s[0]));
    }

    #[test]
    fn deterministic_given_seed() {
        let data = identity_transitions(128);
        let cfg = DynTrainConfig {
            hidden: vec![8],
            epochs: 5,
            batch_size: 32,
            lr: 1e-3,
            val_fraction: 0.2,
            seed: 9,
        };
        let (m1, r1) = train_dynamics(&data, &cfg).unwrap();
        let (m2, r2) = train_dynamics(&data, &cfg).unwrap();
        assert_eq!(m1, m2);
        assert_eq!(r1.val_mse, r2.val_mse);
    }

    #[test]
    fn rejects_empty_and_bad_config() {
        assert!(train_dynamics(&[], &DynTrainConfig::default()).is_err());
        let data = identity_transitions(8);
        let mut cfg = DynTrainConfig::default();
        cfg.val_fraction = 0.0;
        assert!(train_dynamics(&data, &cfg).is_err());
    }

    #[test]
    fn angular_diff_shortest_path() {
        use std::f64::consts::PI;
        assert!((angular_diff(PI - 0.1, -PI + 0.1) + 0.2).abs() < 1e-12);
        assert!((angular_diff(0.3, 0.1) - 0.2).abs() < 1e-12);
    }

    #[test]
    fn smooth_window() {
        let s = smooth(&[4.0, 2.0, 3.0], 2);
        assert_eq!(s, vec![4.0, 3.0, 2.5]);
    }
}
