//! Imitation loss between demonstrated and planned keypoint sequences,
//! plus the transform that re-expresses a demo relative to the robot's
//! own starting frame.

use crate::autodiff::{DualValue, Tape, Tensor};
use crate::error::{Error, Result};
use crate::types::{Demonstration, Keypoint, KeypointFrame, StateLayout, Trajectory};

/// Records the squared-distance loss between planned latent states and
/// demonstrated frames. Sequences must already be aligned to the same
/// length; only keypoint x and y coordinates contribute.
pub fn irl_loss_rec(
    tape: &mut Tape,
    planned: &[DualValue],
    demo_frames: &[KeypointFrame],
    layout: StateLayout,
) -> Result<DualValue> {
    if planned.len() != demo_frames.len() {
        return Err(Error::InvalidInput(format!(
            "imitation loss needs aligned sequences, got {} planned vs {} demonstrated frames",
            planned.len(),
            demo_frames.len()
        )));
    }
    if planned.is_empty() {
        return Err(Error::InvalidInput("imitation loss of empty sequences".into()));
    }
    let k = layout.num_keypoints;
    let mut total: Option<DualValue> = None;
    for (state, frame) in planned.iter().zip(demo_frames) {
        if frame.len() != k {
            return Err(Error::shape(
                "imitation loss frame",
                format!("{k} keypoints"),
                format!("{}", frame.len()),
            ));
        }
        let flat = frame.to_flat();
        let demo_xy = DualValue::constant(Tensor::row(flat[..2 * k].to_vec()));
        let plan_xy = tape.slice_cols(state, layout.x_range().start, 2 * k)?;
        let diff = tape.sub(&plan_xy, &demo_xy)?;
        let sq = tape.square(&diff)?;
        let s = tape.sum(&sq)?;
        total = Some(match total {
            None => s,
            Some(acc) => tape.add(&acc, &s)?,
        });
    }
    Ok(total.unwrap())
}

/// Plain evaluation of the imitation loss.
pub fn irl_loss(demo: &Demonstration, planned: &Trajectory) -> Result<f64> {
    if planned.states.is_empty() {
        return Err(Error::InvalidInput("imitation loss of empty sequences".into()));
    }
    let layout = planned.states[0].layout();
    let mut tape = Tape::new();
    let states: Vec<DualValue> = planned
        .states
        .iter()
        .map(|s| DualValue::constant(s.to_row()))
        .collect();
    irl_loss_rec(&mut tape, &states, &demo.frames, layout)?.scalar()
}

/// Shifts every frame of a demo so its first frame lands on
/// `robot_start`, expressing the demonstrated motion relative to the
/// robot's own starting view. Intensities are copied from the demo.
pub fn make_relative(demo: &Demonstration, robot_start: &KeypointFrame) -> Result<Demonstration> {
    let first = demo
        .frames
        .first()
        .ok_or_else(|| Error::InvalidInput("cannot re-express an empty demo".into()))?;
    if first.len() != robot_start.len() {
        return Err(Error::shape(
            "relative demo",
            format!("{} keypoints", first.len()),
            format!("{}", robot_start.len()),
        ));
    }
    let shift_frame = |frame: &KeypointFrame| {
        KeypointFrame::new(
            frame
                .keypoints
                .iter()
                .zip(&first.keypoints)
                .zip(&robot_start.keypoints)
                .map(|((p, f0), r)| Keypoint::new(p.x - f0.x + r.x, p.y - f0.y + r.y, p.intensity))
                .collect(),
        )
    };
    let frames: Vec<KeypointFrame> = demo.frames.iter().map(shift_frame).collect();
    let goal = shift_frame(&demo.goal);
    Ok(Demonstration {
        scenario_id: demo.scenario_id,
        frames,
        initial_q: demo.initial_q.clone(),
        initial_q_dot: demo.initial_q_dot.clone(),
        goal,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::LatentState;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn frame(coords: &[(f64, f64)]) -> KeypointFrame {
        KeypointFrame::new(
            coords
                .iter()
                .map(|&(x, y)| Keypoint::new(x, y, 1.0))
                .collect(),
        )
    }

    fn demo_from(frames: Vec<KeypointFrame>) -> Demonstration {
        let goal = frames.last().unwrap().clone();
        Demonstration {
            scenario_id: 0,
            frames,
            initial_q: vec![0.0, 0.0],
            initial_q_dot: vec![0.0, 0.0],
            goal,
        }
    }

    fn traj_from(frames: &[KeypointFrame]) -> Trajectory {
        Trajectory::new(
            frames
                .iter()
                .map(|f| LatentState::new(f.clone(), vec![], vec![]).unwrap())
                .collect(),
        )
    }

    #[test]
    fn identical_sequences_have_zero_loss() {
        let frames = vec![frame(&[(1.0, 2.0), (3.0, 4.0)]), frame(&[(0.5, 0.5), (2.0, 2.0)])];
        let demo = demo_from(frames.clone());
        let planned = traj_from(&frames);
        assert_eq!(irl_loss(&demo, &planned).unwrap(), 0.0);
    }

    #[test]
    fn single_step_squared_difference() {
        let demo = demo_from(vec![frame(&[(1.0, 2.0)])]);
        let planned = traj_from(&[frame(&[(1.0, 4.0)])]);
        assert_eq!(irl_loss(&demo, &planned).unwrap(), 4.0);
    }

    #[test]
    fn matches_brute_force_summation() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut rand_frames = |n: usize, k: usize| -> Vec<KeypointFrame> {
            (0..n)
                .map(|_| {
                    KeypointFrame::new(
                        (0..k)
                            .map(|_| {
                                Keypoint::new(
                                    rng.gen_range(-5.0..5.0),
                                    rng.gen_range(-5.0..5.0),
                                    rng.gen_range(0.0..1.0),
                                )
                            })
                            .collect(),
                    )
                })
                .collect()
        };
        let demo_frames = rand_frames(6, 3);
        let plan_frames = rand_frames(6, 3);
        let expected: f64 = demo_frames
            .iter()
            .zip(&plan_frames)
            .flat_map(|(d, p)| d.keypoints.iter().zip(&p.keypoints))
            .map(|(d, p)| (d.x - p.x).powi(2) + (d.y - p.y).powi(2))
            .sum();
        let demo = demo_from(demo_frames);
        let planned = traj_from(&plan_frames);
        let got = irl_loss(&demo, &planned).unwrap();
        assert!((got - expected).abs() < 1e-12 * expected.max(1.0));
    }

    #[test]
    fn intensity_differences_do_not_count() {
        let a = KeypointFrame::new(vec![Keypoint::new(1.0, 2.0, 0.0)]);
        let b = KeypointFrame::new(vec![Keypoint::new(1.0, 2.0, 1.0)]);
        let demo = demo_from(vec![a]);
        let planned = traj_from(&[b]);
        assert_eq!(irl_loss(&demo, &planned).unwrap(), 0.0);
    }

    #[test]
    fn length_mismatch_is_an_error() {
        let demo = demo_from(vec![frame(&[(0.0, 0.0)]), frame(&[(1.0, 1.0)])]);
        let planned = traj_from(&[frame(&[(0.0, 0.0)])]);
        assert!(irl_loss(&demo, &planned).is_err());
    }

    #[test]
    fn keypoint_mismatch_is_an_error() {
        let demo = demo_from(vec![frame(&[(0.0, 0.0), (1.0, 1.0)])]);
        let planned = traj_from(&[frame(&[(0.0, 0.0)])]);
        assert!(irl_loss(&demo, &planned).is_err());
    }

    #[test]
    fn relative_to_own_first_frame_is_identity() {
        let demo = demo_from(vec![
            frame(&[(1.0, 2.0), (3.0, 4.0)]),
            frame(&[(1.5, 2.5), (3.0, 4.0)]),
        ]);
        let out = make_relative(&demo, &demo.frames[0]).unwrap();
        assert_eq!(out, demo);
    }

    #[test]
    fn constant_shift_cancels() {
        let base = vec![
            frame(&[(1.0, 2.0)]),
            frame(&[(2.0, 2.5)]),
            frame(&[(3.0, 3.0)]),
        ];
        let shifted: Vec<KeypointFrame> = base
            .iter()
            .map(|f| {
                KeypointFrame::new(
                    f.keypoints
                        .iter()
                        .map(|p| Keypoint::new(p.x + 7.0, p.y - 3.0, p.intensity))
                        .collect(),
                )
            })
            .collect();
        let out = make_relative(&demo_from(shifted), &base[0]).unwrap();
        assert_eq!(out.frames, base);
    }

    #[test]
    fn first_frame_lands_on_robot_start() {
        let demo = demo_from(vec![frame(&[(5.0, 5.0)]), frame(&[(6.0, 7.0)])]);
        let start = frame(&[(-1.0, 2.0)]);
        let out = make_relative(&demo, &start).unwrap();
        assert_eq!(out.frames[0].keypoints[0].x, -1.0);
        assert_eq!(out.frames[0].keypoints[0].y, 2.0);
    }
}
