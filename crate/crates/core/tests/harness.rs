mod common;

use std::collections::BTreeMap;

use common::*;
use offrl::coverage::c_inf;
use offrl::harness::experiment::cell_seed;
use offrl::harness::report::{read_csv, read_json, summary_path, write_csv, COLUMNS};
use offrl::harness::*;
use offrl::mdp::*;
use offrl::ope::fqe_population;
use offrl::Exec;

fn config(estimators: &[&str], n_grid: Vec<usize>, seeds: usize) -> ExperimentConfig {
    ExperimentConfig {
        scenario: ScenarioRef {
            name: "random".into(),
            params: ScenarioParams { n_states: Some(3), n_actions: Some(2), gamma: Some(0.8), seed: Some(4), ..Default::default() },
        },
        estimators: estimators.iter().map(|id| MethodSpec::new(id)).collect(),
        optimizers: Vec::new(),
        n_grid,
        seeds,
        master_seed: 99,
        delta: 0.05,
        output: None,
    }
}

fn csv_bytes(table: &ResultTable) -> Vec<u8> {
    let mut out = Vec::new();
    write_csv(table, &mut out).unwrap();
    out
}

#[test]
fn loop_return_is_a_truncated_geometric_sum() {
    let sc = build_scenario("loop", &ScenarioParams { horizon: Some(4), gamma: Some(0.9), ..Default::default() }).unwrap();
    let j = policy_return(&sc.mdp, sc.target(), None);
    assert!((j - (1.0 - 0.9f64.powi(4)) / (1.0 - 0.9)).abs() < 1e-12);
    assert!((j - 3.439).abs() < 1e-12);
}

#[test]
fn tree_has_one_policy_per_leaf() {
    let sc = build_scenario("tree", &ScenarioParams { n_actions: Some(2), horizon: Some(3), ..Default::default() }).unwrap();
    assert_eq!(sc.policies.len(), 8);
    let occ: Vec<OccupancyMeasure> = sc.policies.iter().map(|p| occupancy(&sc.mdp, p, None).unwrap()).collect();
    // Leaves are the last eight states; every path policy ends in its own.
    let ns = sc.mdp.n_states();
    for (i, o) in occ.iter().enumerate() {
        let leaves: Vec<usize> = (ns - 8..ns).filter(|&s| o.state_marginal()[s] > 0.0).collect();
        assert_eq!(leaves, vec![ns - 8 + i]);
    }
    // The even mixture of the path occupancies attains the worst-case ratio 8.
    let mut mix = vec![0.0; sc.mdp.n_pairs()];
    for o in &occ {
        for (m, x) in mix.iter_mut().zip(o.dist()) {
            *m += x / 8.0;
        }
    }
    let worst = occ.iter().map(|o| c_inf(o.dist(), &mix)).fold(0.0, f64::max);
    assert!((worst - 8.0).abs() < 1e-9);
}

#[test]
fn divergence_multiplier() {
    // With phi = (1, 2), weights (1/2, 1/2) and f = theta phi, the backup is
    // 2 gamma theta in both states and projects to 6 gamma theta / 5.
    let sc = build_scenario("divergence", &ScenarioParams { gamma: Some(0.95), ..Default::default() }).unwrap();
    let f0 = sc.features.clone().unwrap().eval(&[1.0]);
    let f1 = fqe_population(&sc.mdp, sc.class("F").unwrap(), sc.target(), sc.data_dist.dist(), 1, &f0).unwrap();
    assert!((f1[0].sup_norm() / f0.sup_norm() - 1.14).abs() < 1e-12);
}

#[test]
fn every_scenario_builds_with_consistent_shapes() {
    for name in SCENARIOS {
        let sc = build_scenario(name, &ScenarioParams::default()).unwrap();
        let (ns, na) = (sc.mdp.n_states(), sc.mdp.n_actions());
        assert_eq!(sc.data_dist.dist().len(), ns * na, "{name}");
        assert_eq!(sc.behavior.n_states(), ns, "{name}");
        assert!(sc.policies.iter().all(|p| p.n_states() == ns && p.n_actions() == na), "{name}");
        assert!(sc.classes.values().all(|c| c.shape() == (ns, na)), "{name}");
        assert!(!sc.summary().is_empty());
    }
    assert!(matches!(build_scenario("nope", &ScenarioParams::default()), Err(offrl::Error::UnknownScenario(_))));
    assert!(build_scenario("loop", &ScenarioParams { gamma: Some(1.0), ..Default::default() }).is_err());
}

#[test]
fn single_cell_gives_one_row() {
    let table = run_experiment(&config(&["fqe"], vec![200], 1), Exec::Sequential).unwrap();
    assert_eq!(table.rows.len(), 1);
    let row = &table.rows[0];
    assert_eq!((row.estimator.as_str(), row.n, row.seed), ("fqe", 200, 0));
    assert!(row.error_code.is_empty());
    assert!((row.abs_error.unwrap() - (row.point.unwrap() - row.truth.unwrap()).abs()).abs() < 1e-12);
}

#[test]
fn reruns_are_byte_identical() {
    let cfg = config(&["fqe", "lstdq", "mle"], vec![100, 400], 3);
    let a = csv_bytes(&run_experiment(&cfg, Exec::Sequential).unwrap());
    let b = csv_bytes(&run_experiment(&cfg, Exec::Sequential).unwrap());
    assert_eq!(a, b);
    let other = ExperimentConfig { master_seed: 100, ..cfg };
    assert_ne!(a, csv_bytes(&run_experiment(&other, Exec::Sequential).unwrap()));
}

#[test]
fn worker_count_does_not_change_the_table() {
    let cfg = config(&["fqe", "brm", "mwl"], vec![150, 300], 4);
    let seq = run_experiment(&cfg, Exec::Sequential).unwrap();
    for workers in [2, 5] {
        assert_eq!(run_experiment(&cfg, Exec::with_workers(workers)).unwrap(), seq);
    }
}

#[test]
fn cell_seeds_depend_on_every_key() {
    let base = cell_seed(1, "random", "fqe", 100, 0);
    assert_eq!(base, cell_seed(1, "random", "fqe", 100, 0));
    for other in [
        cell_seed(2, "random", "fqe", 100, 0),
        cell_seed(1, "loop", "fqe", 100, 0),
        cell_seed(1, "random", "brm", 100, 0),
        cell_seed(1, "random", "fqe", 101, 0),
        cell_seed(1, "random", "fqe", 100, 1),
    ] {
        assert_ne!(base, other);
    }
}

#[test]
fn failing_cells_become_error_rows() {
    let mut cfg = config(&["is", "fqe"], vec![50], 2);
    cfg.scenario = ScenarioRef { name: "divergence".into(), params: ScenarioParams::default() };
    let table = run_experiment(&cfg, Exec::Sequential).unwrap();
    assert_eq!(table.rows.len(), 4);
    for row in table.rows.iter().filter(|r| r.estimator == "is") {
        assert_eq!(row.error_code, "unsupported");
        assert!(row.point.is_none());
    }
    assert!(table.rows.iter().filter(|r| r.estimator == "fqe").all(|r| r.error_code.is_empty()));
}

#[test]
fn invalid_configs_are_rejected() {
    assert!(run_experiment(&config(&[], vec![10], 1), Exec::Sequential).is_err());
    assert!(run_experiment(&config(&["fqe"], vec![10], 0), Exec::Sequential).is_err());
    assert!(matches!(run_experiment(&config(&["dr"], vec![10], 1), Exec::Sequential), Err(offrl::Error::UnknownIdentifier(_))));
    assert!(ExperimentConfig::from_json(r#"{"scenario": {"name": "loop"}, "estimators": [{"id": "is"}], "n_grid": [5], "seeds": 1, "master_seed": 0, "bogus": 1}"#).is_err());
}

#[test]
fn empty_table_is_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("empty.csv");
    emit_report(&ResultTable::default(), Format::Csv, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.trim_end(), COLUMNS.join(","));
    assert!(read_csv(text.as_bytes()).unwrap().rows.is_empty());
}

#[test]
fn csv_and_json_carry_the_same_values() {
    let table = run_experiment(&config(&["fqe", "mql", "is"], vec![120], 3), Exec::Sequential).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let (csv_path, json_path) = (dir.path().join("r.csv"), dir.path().join("r.json"));
    emit_report(&table, Format::Csv, &csv_path).unwrap();
    emit_report(&table, Format::Json, &json_path).unwrap();
    let from_csv = read_csv(std::fs::File::open(&csv_path).unwrap()).unwrap();
    let from_json = read_json(std::fs::File::open(&json_path).unwrap()).unwrap();
    assert_eq!(from_csv.rows, from_json.rows);
    assert_eq!(from_csv.rows.len(), table.rows.len());
    for (a, b) in from_csv.rows.iter().zip(&table.rows) {
        // Twelve significant digits survive the trip.
        if let (Some(x), Some(y)) = (a.point, b.point) {
            assert!((x - y).abs() <= 1e-11 * y.abs().max(1.0));
        }
    }
}

#[test]
fn floats_carry_twelve_significant_digits() {
    let table = run_experiment(&config(&["fqe"], vec![100], 1), Exec::Sequential).unwrap();
    let text = String::from_utf8(csv_bytes(&table)).unwrap();
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    let point = row[4];
    let mantissa = point.split('e').next().unwrap().trim_start_matches('-');
    assert_eq!(mantissa.chars().filter(|c| c.is_ascii_digit()).count(), 12, "{point}");
}

#[test]
fn summary_medians_match_a_recomputation() {
    let table = run_experiment(&config(&["fqe", "lstdq"], vec![100, 300], 5), Exec::Sequential).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("out.csv");
    emit_report(&table, Format::Csv, &path).unwrap();

    let rows = read_csv(std::fs::File::open(&path).unwrap()).unwrap().rows;
    let mut groups: BTreeMap<(String, usize), Vec<f64>> = BTreeMap::new();
    for r in &rows {
        groups.entry((r.estimator.clone(), r.n)).or_default().push(r.abs_error.unwrap());
    }
    let mut rd = csv::Reader::from_path(summary_path(&path)).unwrap();
    let mut seen = 0;
    for rec in rd.records() {
        let rec = rec.unwrap();
        let key = (rec[0].to_string(), rec[1].parse::<usize>().unwrap());
        let med: f64 = rec[2].parse().unwrap();
        let expected = median(groups[&key].clone());
        assert!((med - expected).abs() <= 1e-11 * expected.abs().max(1e-300), "{key:?}");
        assert_eq!(rec[3].parse::<usize>().unwrap(), 5);
        seen += 1;
    }
    assert_eq!(seen, groups.len());
}

#[test]
fn every_shipped_config_parses() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut checks = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let text = std::fs::read_to_string(entry.unwrap().path()).unwrap();
        let value: serde_json::Value = serde_json::from_str(&text).unwrap();
        if value.get("check").is_some() {
            let cfg: CheckConfig = serde_json::from_value(value).unwrap();
            assert!(CHECKS.contains(&cfg.check.as_str()));
            checks += 1;
        } else {
            ExperimentConfig::from_json(&text).unwrap();
        }
    }
    assert_eq!(checks, CHECKS.len());
}
