mod common;

use common::*;
use offrl::data::sample_tuples;
use offrl::function_class::bvft_partition;
use offrl::mdp::*;
use offrl::selection::*;
use offrl::Exec;
use rand::Rng;

const GAMMA: f64 = 0.5;

fn instance(seed: u64) -> (TabularMdp, StationaryPolicy, ValueFunction) {
    let mut r = rng(seed);
    let mdp = noisy_mdp(&mut r, 5, 2, GAMMA);
    let pi = random_policy(&mut r, 5, 2);
    let q = ValueFunction::new(5, 2, iterate_q(&mdp, &pi, 1e-13)).unwrap();
    (mdp, pi, q)
}

/// `Q^pi` plus entries of size 0.3 to 0.5 v_max with random signs, clipped.
fn corrupted<R: Rng>(r: &mut R, q: &ValueFunction, v_max: f64) -> ValueFunction {
    let vals = q
        .values()
        .iter()
        .map(|&x| {
            let u = r.gen_range(0.3..0.5) * v_max;
            let y = if r.gen::<bool>() { x + u } else { x - u };
            y.clamp(0.0, v_max)
        })
        .collect();
    ValueFunction::new(q.n_states(), q.n_actions(), vals).unwrap()
}

fn planted_run(seed: u64, n: usize) -> bool {
    let (mdp, pi, q) = instance(seed);
    let v_max = mdp.v_max();
    let mut r = rng(seed ^ 0xabc);
    let mut cands: Vec<ValueFunction> = (0..4).map(|_| corrupted(&mut r, &q, v_max)).collect();
    let pos = r.gen_range(0..5);
    cands.insert(pos, q);
    let data = sample_tuples(&mdp, &OccupancyMeasure::uniform(5, 2), n, seed);
    bvft_tournament(Exec::Sequential, &cands, &data, &pi, GAMMA, v_max / 20.0, v_max).unwrap().winner_index == pos
}

#[test]
fn identical_candidates_tie_to_the_first() {
    let (mdp, pi, q) = instance(1);
    let v_max = mdp.v_max();
    let eps = v_max / 20.0;
    let n = 10_000;
    let data = sample_tuples(&mdp, &OccupancyMeasure::uniform(5, 2), n, 2);
    let out = bvft_pair(&q, &q, &data, &pi, GAMMA, eps, v_max).unwrap();
    assert_eq!(out.chosen, 0);
    assert_eq!(out.residuals[0], out.residuals[1]);
    let slack = eps / (1.0 - GAMMA) + 3.0 * v_max * (10.0 / n as f64).sqrt();
    assert!(out.residuals[0] <= slack, "{} > {slack}", out.residuals[0]);
}

#[test]
fn truth_beats_a_half_range_shift() {
    let mut wins = 0;
    for seed in 0..100 {
        let (mdp, pi, q) = instance(100 + seed);
        let v_max = mdp.v_max();
        let eps = v_max / 20.0;
        let shifted = q.map(|x| x + 0.5 * v_max);
        let d = vec![0.1; 10];
        let pop = bvft_pair_population(&mdp, &q, &shifted, &pi, &d, eps).unwrap();
        assert!(pop[0] < pop[1], "seed {seed}: population residuals {pop:?}");
        let data = sample_tuples(&mdp, &OccupancyMeasure::uniform(5, 2), 10_000, seed);
        wins += (bvft_pair(&q, &shifted, &data, &pi, GAMMA, eps, v_max).unwrap().chosen == 0) as usize;
    }
    assert!(wins >= 95, "truth chosen in {wins}/100");
}

#[test]
fn partitions_respect_the_cell_bound() {
    let mut r = rng(3);
    for _ in 0..500 {
        let (ns, na) = (r.gen_range(1..8), r.gen_range(1..4));
        let v_max = r.gen_range(0.5..20.0);
        let eps = v_max / r.gen_range(1.0..30.0);
        let f1 = random_function(&mut r, ns, na, v_max).map(|x| x.abs());
        let f2 = random_function(&mut r, ns, na, v_max).map(|x| x.abs());
        let part = bvft_partition(&f1, &f2, eps, v_max).unwrap();
        let per_axis = (v_max / eps).ceil() as usize + 1;
        assert!(part.n_cells() <= per_axis * per_axis);
        assert_eq!(cell_bound(v_max, eps), per_axis * per_axis);
    }
}

#[test]
fn two_candidate_tournament_is_the_pair() {
    for seed in 0..20 {
        let (mdp, pi, q) = instance(200 + seed);
        let v_max = mdp.v_max();
        let mut r = rng(seed);
        let other = corrupted(&mut r, &q, v_max);
        let data = sample_tuples(&mdp, &OccupancyMeasure::uniform(5, 2), 500, seed);
        let pair = bvft_pair(&other, &q, &data, &pi, GAMMA, v_max / 20.0, v_max).unwrap();
        let rep = bvft_tournament(Exec::Sequential, &[other, q], &data, &pi, GAMMA, v_max / 20.0, v_max).unwrap();
        assert_eq!(rep.winner_index, pair.chosen);
        assert_eq!(rep.pairwise_losses[0][1], pair.residuals[0]);
        assert_eq!(rep.pairwise_losses[1][0], pair.residuals[1]);
    }
}

#[test]
fn planted_truth_wins_the_tournament() {
    let wins = (0..100).filter(|&seed| planted_run(300 + seed, 10_000)).count();
    assert!(wins >= 90, "planted Q^pi won {wins}/100");
}

#[test]
fn recovery_does_not_degrade_with_more_data() {
    let pairs: Vec<(bool, bool)> = (0..100).map(|seed| (planted_run(500 + seed, 1000), planted_run(500 + seed, 10_000))).collect();
    let monotone = pairs.iter().filter(|(small, large)| *large || !*small).count();
    assert!(monotone >= 80, "monotone in {monotone}/100");
}

#[test]
fn identical_field_picks_index_zero() {
    let (mdp, pi, q) = instance(4);
    let v_max = mdp.v_max();
    let data = sample_tuples(&mdp, &OccupancyMeasure::uniform(5, 2), 2000, 5);
    let rep = bvft_tournament(Exec::Sequential, &vec![q; 4], &data, &pi, GAMMA, v_max / 10.0, v_max).unwrap();
    assert_eq!(rep.winner_index, 0);
    let first = rep.pairwise_losses[0][1];
    for i in 0..4 {
        for j in 0..4 {
            if i != j {
                assert!((rep.pairwise_losses[i][j] - first).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn empirical_residual_of_the_truth_tracks_the_population() {
    let n = 40_000;
    for seed in 0..10 {
        let (mdp, pi, q) = instance(600 + seed);
        let v_max = mdp.v_max();
        let eps = v_max / 20.0;
        let mut r = rng(seed);
        let other = corrupted(&mut r, &q, v_max);
        let pop = bvft_pair_population(&mdp, &q, &other, &pi, &[0.1; 10], eps).unwrap();
        let data = sample_tuples(&mdp, &OccupancyMeasure::uniform(5, 2), n, seed);
        let emp = bvft_pair(&q, &other, &data, &pi, GAMMA, eps, v_max).unwrap();
        assert!(pop[0] <= eps / (1.0 - GAMMA));
        assert!((emp.residuals[0] - pop[0]).abs() <= 3.0 * v_max * (10.0 / n as f64).sqrt());
    }
}

#[test]
fn tournaments_do_not_depend_on_the_executor() {
    let (mdp, pi, q) = instance(7);
    let v_max = mdp.v_max();
    let mut r = rng(8);
    let cands: Vec<ValueFunction> = std::iter::once(q.clone()).chain((0..5).map(|_| corrupted(&mut r, &q, v_max))).collect();
    let data = sample_tuples(&mdp, &OccupancyMeasure::uniform(5, 2), 3000, 9);
    let seq = bvft_tournament(Exec::Sequential, &cands, &data, &pi, GAMMA, v_max / 20.0, v_max).unwrap();
    let par = bvft_tournament(Exec::with_workers(3), &cands, &data, &pi, GAMMA, v_max / 20.0, v_max).unwrap();
    assert_eq!(seq, par);
    assert!(bvft_tournament(Exec::Sequential, &cands[..1], &data, &pi, GAMMA, 0.1, v_max).is_err());
}
