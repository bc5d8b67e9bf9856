use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Trajectory, TrajectoryDataset, Transition, TupleDataset};
use crate::exec::Exec;
use crate::mdp::{OccupancyMeasure, StationaryPolicy, TabularMdp};

/// Tuples drawn from one random stream. Streams are indexed by block, so
/// output does not depend on how blocks are scheduled.
const TUPLE_BLOCK: usize = 1024;

/// Independent stream `index` of the generator seeded by `seed`.
pub fn cell_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Inverse-CDF draw; never returns an index with zero mass.
fn categorical<R: Rng>(rng: &mut R, probs: &[f64]) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last = i;
            if u < acc {
                return i;
            }
        }
    }
    last
}

fn draw_reward<R: Rng>(mdp: &TabularMdp, p: usize, rng: &mut R) -> f64 {
    match mdp.reward_noise() {
        Some(noise) => {
            let law = &noise[p];
            let probs: Vec<f64> = law.iter().map(|o| o.prob).collect();
            law[categorical(rng, &probs)].value
        }
        None => mdp.reward()[p],
    }
}

fn draw_transition<R: Rng>(mdp: &TabularMdp, s: usize, a: usize, rng: &mut R) -> Transition {
    let p = mdp.pair(s, a);
    let r = draw_reward(mdp, p, rng);
    let s_next = categorical(rng, mdp.next_dist(p));
    Transition { s, a, r, s_next }
}

pub fn sample_trajectories(mdp: &TabularMdp, behavior: &StationaryPolicy, n: usize, horizon: usize, seed: u64) -> TrajectoryDataset {
    sample_trajectories_with(Exec::default(), mdp, behavior, n, horizon, seed)
}

/// `n` episodes of at most `horizon` steps; an episode stops early when it
/// enters a zero-reward self-looping state.
pub fn sample_trajectories_with(
    exec: Exec,
    mdp: &TabularMdp,
    behavior: &StationaryPolicy,
    n: usize,
    horizon: usize,
    seed: u64,
) -> TrajectoryDataset {
    let absorbing = mdp.absorbing_states();
    let trajectories = exec.map_indexed(n, |i| {
        let mut rng = cell_rng(seed, i as u64);
        let mut s = categorical(&mut rng, mdp.init_dist());
        let mut steps = Vec::with_capacity(horizon);
        for _ in 0..horizon {
            if absorbing[s] {
                break;
            }
            let a = categorical(&mut rng, behavior.row(s));
            let t = draw_transition(mdp, s, a, &mut rng);
            s = t.s_next;
            steps.push(t);
        }
        Trajectory { steps }
    });
    TrajectoryDataset { trajectories, behavior: behavior.clone(), horizon, seed }
}

pub fn sample_tuples(mdp: &TabularMdp, d_d: &OccupancyMeasure, n: usize, seed: u64) -> TupleDataset {
    sample_tuples_with(Exec::default(), mdp, d_d, n, seed)
}

/// `n` i.i.d. tuples with `(s,a) ~ d_d`, reward from the reward law and
/// `s' ~ P(.|s,a)`.
pub fn sample_tuples_with(exec: Exec, mdp: &TabularMdp, d_d: &OccupancyMeasure, n: usize, seed: u64) -> TupleDataset {
    let na = mdp.n_actions();
    let blocks = n.div_ceil(TUPLE_BLOCK);
    let parts = exec.map_indexed(blocks, |b| {
        let mut rng = cell_rng(seed, b as u64);
        let len = TUPLE_BLOCK.min(n - b * TUPLE_BLOCK);
        (0..len)
            .map(|_| {
                let p = categorical(&mut rng, d_d.dist());
                draw_transition(mdp, p / na, p % na, &mut rng)
            })
            .collect::<Vec<_>>()
    });
    TupleDataset { tuples: parts.into_iter().flatten().collect(), data_dist: Some(d_d.clone()), seed }
}

/// All per-step tuples in trajectory then step order. The result does not
/// claim a sampling distribution.
pub fn tuples_from_trajectories(td: &TrajectoryDataset) -> TupleDataset {
    let tuples = td.trajectories.iter().flat_map(|t| t.steps.iter().copied()).collect();
    TupleDataset { tuples, data_dist: None, seed: td.seed }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn categorical_skips_zero_mass() {
        let mut rng = cell_rng(1, 0);
        for _ in 0..1000 {
            assert_eq!(categorical(&mut rng, &[0.0, 1.0, 0.0]), 1);
        }
    }

    #[test]
    fn block_boundaries_do_not_change_streams() {
        let mdp = TabularMdp::new(2, 1, vec![0.5, 0.5, 0.5, 0.5], vec![0.0, 1.0], 0.5, vec![0.5, 0.5], 1.0).unwrap();
        let d = OccupancyMeasure::uniform(2, 1);
        let a = sample_tuples_with(Exec::Sequential, &mdp, &d, 3000, 9);
        let b = sample_tuples_with(Exec::with_workers(3), &mdp, &d, 3000, 9);
        assert_eq!(a, b);
        let prefix = sample_tuples_with(Exec::Sequential, &mdp, &d, 1024, 9);
        assert_eq!(&a.tuples[..1024], &prefix.tuples[..]);
    }
}
