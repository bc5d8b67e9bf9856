mod common;

use common::*;
use nalgebra::{DMatrix, DVector};
use offrl::coverage::*;
use offrl::function_class::{gen_low_rank_mdp, FeatureMap, FunctionClass};
use offrl::mdp::*;
use rand::Rng;

fn q_pi_class(mdp: &TabularMdp, pi: &StationaryPolicy) -> FunctionClass {
    FunctionClass::finite(vec![solve_q(mdp, Target::Policy(pi), 1e-12).unwrap()]).unwrap()
}

#[test]
fn concentrability_conventions() {
    let mut r = rng(1);
    let d = simplex(&mut r, 6);
    assert!((c_inf(&d, &d) - 1.0).abs() < 1e-12);
    assert_eq!(c_inf(&[0.5, 0.5], &[1.0, 0.0]), f64::INFINITY);
    assert_eq!(c_inf(&[1.0, 0.0], &[1.0, 0.0]), 1.0);
    for _ in 0..50 {
        let p = simplex(&mut r, 7);
        let q = simplex(&mut r, 7);
        let mut scan = 0.0_f64;
        for i in 0..7 {
            scan = scan.max(p[i] / q[i]);
        }
        assert_eq!(c_inf(&p, &q), scan);
    }
}

#[test]
fn bellman_error_coefficients_vanish_on_the_truth() {
    let mut r = rng(2);
    let mdp = random_mdp(&mut r, 4, 2, 0.9);
    let pi = random_policy(&mut r, 4, 2);
    let class = q_pi_class(&mdp, &pi);
    let d = simplex(&mut r, 8);
    assert_eq!(c_sq(&class, &mdp, &pi, &d).unwrap().value, 0.0);
    assert_eq!(c_avg(&class, &mdp, &pi, &d).unwrap().value, 0.0);
}

#[test]
fn on_policy_data_give_unit_coefficients() {
    let mut r = rng(3);
    let mdp = random_mdp(&mut r, 4, 2, 0.9);
    let pi = random_policy(&mut r, 4, 2);
    let d_pi = occupancy(&mdp, &pi, None).unwrap();
    let class = FunctionClass::finite((0..6).map(|_| random_function(&mut r, 4, 2, 10.0)).collect()).unwrap();
    assert!(c_sq(&class, &mdp, &pi, d_pi.dist()).unwrap().value <= 1.0 + 1e-9);
    assert!((chi_sq_coverage(d_pi.dist(), d_pi.dist()) - 1.0).abs() < 1e-12);
}

#[test]
fn coefficient_ordering_on_random_instances() {
    let mut r = rng(4);
    for _ in 0..100 {
        let (ns, na) = (r.gen_range(2..6), r.gen_range(2..4));
        let gamma = r.gen_range(0.3..0.95);
        let mdp = random_mdp(&mut r, ns, na, gamma);
        let pi = random_policy(&mut r, ns, na);
        let d = simplex(&mut r, ns * na);
        let d_pi = occupancy(&mdp, &pi, None).unwrap();
        let class = FunctionClass::finite((0..5).map(|_| random_function(&mut r, ns, na, 10.0)).collect()).unwrap();
        let ci = c_inf(d_pi.dist(), &d);
        let sq = c_sq(&class, &mdp, &pi, &d).unwrap().value;
        let avg = c_avg(&class, &mdp, &pi, &d).unwrap().value;
        assert!(sq <= ci * (1.0 + 1e-9));
        assert!(avg <= sq * (1.0 + 1e-9) + 1e-12);
        assert!(chi_sq_coverage(d_pi.dist(), &d) <= ci * (1.0 + 1e-9));
    }
}

#[test]
fn linear_average_coefficient_is_the_quadratic_form() {
    let mut r = rng(5);
    let mdp = random_mdp(&mut r, 5, 2, 0.8);
    let pi = random_policy(&mut r, 5, 2);
    let d = simplex(&mut r, 10);
    let feats: Vec<f64> = (0..30).map(|_| r.gen::<f64>()).collect();
    let phi = FeatureMap::from_features(5, 2, 3, feats.clone()).unwrap();
    let value = c_avg(&FunctionClass::linear(phi), &mdp, &pi, &d).unwrap().value;

    let d_pi = occupancy(&mdp, &pi, None).unwrap();
    let x = DMatrix::from_row_slice(10, 3, &feats);
    let sigma = x.transpose() * DMatrix::from_diagonal(&DVector::from_vec(d.clone())) * &x;
    let mu = x.transpose() * DVector::from_column_slice(d_pi.dist());
    let sol = sigma.lu().solve(&mu).unwrap();
    assert!((value - mu.dot(&sol)).abs() <= 1e-9 * value.max(1.0));
}

#[test]
fn chi_square_examples() {
    assert!((chi_sq_coverage(&[1.0, 0.0], &[0.5, 0.5]) - 2.0).abs() < 1e-15);
    let mut r = rng(6);
    for _ in 0..100 {
        let p = simplex(&mut r, 5);
        let q = simplex(&mut r, 5);
        assert!(chi_sq_coverage(&p, &q) <= c_inf(&p, &q) * (1.0 + 1e-12));
    }
}

#[test]
fn indicator_features_give_the_density_ratio() {
    let mut r = rng(7);
    let mdp = random_mdp(&mut r, 3, 2, 0.9);
    let pi = random_policy(&mut r, 3, 2);
    let d = simplex(&mut r, 6);
    let ew = effective_weight(&FeatureMap::tabular(3, 2), &mdp, &pi, &d).unwrap();
    let d_pi = occupancy(&mdp, &pi, None).unwrap();
    for p in 0..6 {
        assert!((ew.weights.values()[p] - d_pi.dist()[p] / d[p]).abs() <= 1e-9 * (1.0 + d_pi.dist()[p] / d[p]));
    }
}

#[test]
fn effective_weight_matches_feature_means() {
    for seed in 0..10 {
        let lr = gen_low_rank_mdp(2, 6, 2, 0.9, seed).unwrap();
        let mut r = rng(seed);
        let pi = random_policy(&mut r, 6, 2);
        let d = simplex(&mut r, 12);
        let ew = effective_weight(&lr.features, &lr.mdp, &pi, &d).unwrap();
        let d_pi = occupancy(&lr.mdp, &pi, None).unwrap();
        let res = mean_matching_residual(&lr.features, &ew.weights, d_pi.dist(), &d);
        assert!(res.amax() <= 1e-8);
        let second: f64 = ew.weights.values().iter().zip(&d).map(|(w, m)| m * w * w).sum();
        let quad = c_avg(&FunctionClass::linear(lr.features.clone()), &lr.mdp, &pi, &d).unwrap().value;
        assert!((second - quad).abs() <= 1e-9 * quad.max(1.0));
    }
}

#[test]
fn report_collects_every_diagnostic() {
    let mut r = rng(8);
    let mdp = random_mdp(&mut r, 3, 2, 0.9);
    let pi = random_policy(&mut r, 3, 2);
    let d = simplex(&mut r, 6);
    let phi = FeatureMap::tabular(3, 2);
    let rep = coverage_report(&mdp, &pi, &d, Some(&FunctionClass::tabular(3, 2)), Some(&phi)).unwrap();
    assert!(rep.c_sq.unwrap().upper_bound);
    assert_eq!(rep.gram_d.unwrap().len(), 6);
    assert!((rep.sigma_min_d.unwrap() - d.iter().cloned().fold(f64::INFINITY, f64::min)).abs() < 1e-12);
}
