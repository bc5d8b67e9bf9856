//! Sequential fallback against the rayon executor on the three parallel paths:
//! tuple sampling, experiment sweeps and BVFT tournaments.
//!
//! Build with `--no-default-features` to confirm the fallback compiles; the
//! `parallel` rows then run sequentially too.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use offrl::data::sample_tuples_with;
use offrl::harness::{build_scenario, run_experiment, ExperimentConfig, MethodSpec, ScenarioParams, ScenarioRef};
use offrl::mdp::{solve_q, OccupancyMeasure, Target, ValueFunction};
use offrl::selection::bvft_tournament;
use offrl::Exec;
use std::hint::black_box;

fn execs() -> [(&'static str, Exec); 2] {
    [("sequential", Exec::Sequential), ("parallel", Exec::default())]
}

fn random_params() -> ScenarioParams {
    ScenarioParams { n_states: Some(6), n_actions: Some(3), gamma: Some(0.8), seed: Some(1), ..Default::default() }
}

fn sampling(c: &mut Criterion) {
    let sc = build_scenario("random", &random_params()).unwrap();
    let mut g = c.benchmark_group("sample_tuples");
    for (name, exec) in execs() {
        g.bench_function(BenchmarkId::new(name, 200_000), |b| {
            b.iter(|| sample_tuples_with(exec, &sc.mdp, &sc.data_dist, black_box(200_000), 7))
        });
    }
    g.finish();
}

fn sweep(c: &mut Criterion) {
    let cfg = ExperimentConfig {
        scenario: ScenarioRef { name: "random".into(), params: random_params() },
        estimators: ["fqe", "lstdq", "mwl"].iter().map(|id| MethodSpec::new(id)).collect(),
        optimizers: Vec::new(),
        n_grid: vec![1000, 4000],
        seeds: 8,
        master_seed: 3,
        delta: 0.05,
        output: None,
    };
    let mut g = c.benchmark_group("run_experiment");
    g.sample_size(10);
    for (name, exec) in execs() {
        g.bench_function(name, |b| b.iter(|| run_experiment(black_box(&cfg), exec).unwrap()));
    }
    g.finish();
}

fn tournament(c: &mut Criterion) {
    let sc = build_scenario("random", &random_params()).unwrap();
    let pi = sc.target().clone();
    let q = solve_q(&sc.mdp, Target::Policy(&pi), 1e-12).unwrap();
    let v_max = sc.mdp.v_max();
    let cands: Vec<ValueFunction> =
        (0..12).map(|k| q.map(|x| (x + (k as f64 - 6.0) * 0.05 * v_max).clamp(0.0, v_max))).collect();
    let data = sample_tuples_with(Exec::Sequential, &sc.mdp, &OccupancyMeasure::uniform(6, 3), 20_000, 5);
    let mut g = c.benchmark_group("bvft_tournament");
    for (name, exec) in execs() {
        g.bench_function(name, |b| {
            b.iter(|| bvft_tournament(exec, black_box(&cands), &data, &pi, 0.8, v_max / 20.0, v_max).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, sampling, sweep, tournament);
criterion_main!(benches);
