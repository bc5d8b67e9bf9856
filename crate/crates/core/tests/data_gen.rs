mod common;

use common::*;
use offrl::data::*;
use offrl::mdp::{OccupancyMeasure, StationaryPolicy};
use offrl::{Error, Exec};

#[test]
fn deterministic_world_gives_identical_trajectories() {
    let mdp = deterministic_mdp(3, 2, &[1, 2, 2, 0, 0, 1], vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6], 0.9, vec![1.0, 0.0, 0.0]);
    let pi = StationaryPolicy::deterministic(2, &[0, 1, 0]).unwrap();
    let td = sample_trajectories(&mdp, &pi, 20, 6, 3);
    assert_eq!(td.trajectories.len(), 20);
    assert!(td.trajectories.iter().all(|t| t == &td.trajectories[0]));
}

#[test]
fn uniform_behavior_action_frequencies() {
    let n = 100_000;
    let td = sample_trajectories(&loop_mdp(0.9), &StationaryPolicy::uniform(1, 2), n, 5, 11);
    let band = 3.0 * (0.25 / n as f64).sqrt();
    for t in 0..5 {
        let ones = td.trajectories.iter().filter(|tr| tr.steps[t].a == 0).count();
        assert!((ones as f64 / n as f64 - 0.5).abs() <= band, "step {t}");
    }
}

#[test]
fn same_seed_same_bytes() {
    let mut r = rng(1);
    let mdp = noisy_mdp(&mut r, 4, 2, 0.9);
    let pi = random_policy(&mut r, 4, 2);
    let bytes = |td: &TrajectoryDataset| {
        let mut out = Vec::new();
        write_trajectories(td, &mut out).unwrap();
        out
    };
    assert_eq!(bytes(&sample_trajectories(&mdp, &pi, 50, 7, 5)), bytes(&sample_trajectories(&mdp, &pi, 50, 7, 5)));
    let d = OccupancyMeasure::uniform(4, 2);
    assert_eq!(sample_tuples(&mdp, &d, 500, 9), sample_tuples(&mdp, &d, 500, 9));
}

#[test]
fn worker_count_does_not_change_samples() {
    let mut r = rng(2);
    let mdp = noisy_mdp(&mut r, 3, 3, 0.8);
    let pi = random_policy(&mut r, 3, 3);
    let d = OccupancyMeasure::uniform(3, 3);
    let seq = sample_tuples_with(Exec::Sequential, &mdp, &d, 3000, 4);
    let par = sample_tuples_with(Exec::with_workers(4), &mdp, &d, 3000, 4);
    assert_eq!(seq, par);
    let seq = sample_trajectories_with(Exec::Sequential, &mdp, &pi, 100, 8, 4);
    let par = sample_trajectories_with(Exec::with_workers(4), &mdp, &pi, 100, 8, 4);
    assert_eq!(seq, par);
}

#[test]
fn point_mass_data_share_the_pair() {
    let mut r = rng(3);
    let mdp = random_mdp(&mut r, 3, 2, 0.9);
    let ds = sample_tuples(&mdp, &OccupancyMeasure::point_mass(3, 2, 1, 1), 200, 1);
    assert!(ds.tuples.iter().all(|t| t.s == 1 && t.a == 1));
}

#[test]
fn empirical_pair_frequencies_concentrate() {
    let mut r = rng(4);
    let mdp = random_mdp(&mut r, 3, 2, 0.9);
    let d = OccupancyMeasure::new(3, 2, simplex(&mut r, 6)).unwrap();
    let n = 100_000;
    let ds = sample_tuples(&mdp, &d, n, 2);
    let emp = ds.empirical_dist(3, 2);
    let tv = 0.5 * emp.iter().zip(d.dist()).map(|(a, b)| (a - b).abs()).sum::<f64>();
    assert!(tv <= 2.0 * (6.0 / n as f64).sqrt(), "tv {tv}");
}

#[test]
fn deterministic_transitions_are_respected() {
    let next = [1, 0, 2, 2, 0, 1];
    let mdp = deterministic_mdp(3, 2, &next, vec![0.0; 6], 0.5, vec![1.0, 0.0, 0.0]);
    let ds = sample_tuples(&mdp, &OccupancyMeasure::uniform(3, 2), 1000, 3);
    assert!(ds.tuples.iter().all(|t| t.s_next == next[t.s * 2 + t.a]));
}

#[test]
fn trajectory_flattening() {
    let mut r = rng(5);
    let mdp = random_mdp(&mut r, 3, 2, 0.9);
    let pi = random_policy(&mut r, 3, 2);
    let one = sample_trajectories(&mdp, &pi, 1, 3, 1);
    let flat = tuples_from_trajectories(&one);
    assert_eq!(flat.tuples, one.trajectories[0].steps);

    let many = sample_trajectories(&mdp, &pi, 40, 6, 2);
    let flat = tuples_from_trajectories(&many);
    assert_eq!(flat.len(), 40 * 6);
    for t in &flat.tuples {
        assert!(many.trajectories.iter().any(|tr| tr.steps.contains(t)));
    }
}

#[test]
fn tuple_files_round_trip() {
    let mut r = rng(6);
    let mdp = noisy_mdp(&mut r, 4, 2, 0.9);
    let ds = sample_tuples(&mdp, &OccupancyMeasure::uniform(4, 2), 300, 12);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.txt");
    save_tuples(&ds, &path).unwrap();
    assert_eq!(load_tuples(&path).unwrap(), ds);

    let td = sample_trajectories(&mdp, &random_policy(&mut r, 4, 2), 30, 5, 13);
    let path = dir.path().join("tr.txt");
    save_trajectories(&td, &path).unwrap();
    assert_eq!(load_trajectories(&path).unwrap(), td);
}

#[test]
fn empty_dataset_is_header_only() {
    let ds = TupleDataset::new(Vec::new());
    let mut out = Vec::new();
    write_tuples(&ds, &mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    assert!(text.lines().all(|l| l.starts_with('#')));
    assert_eq!(read_tuples(text.as_bytes()).unwrap(), ds);
}

#[test]
fn corrupted_line_is_named() {
    let text = "# offrl-tuples v1\n# seed 0\n0 1 0.5 2\n1 0 0.25\n";
    match read_tuples(text.as_bytes()) {
        Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
        other => panic!("expected a parse error, got {other:?}"),
    }
}
