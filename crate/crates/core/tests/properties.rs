//! Randomized invariants over generated instances.

mod common;

use common::*;
use offrl::coverage::{c_avg, c_inf, c_sq, chi_sq_coverage};
use offrl::data::{sample_tuples, sample_tuples_with};
use offrl::function_class::{bvft_partition, project, FeatureMap, FunctionClass, Partition};
use offrl::harness::experiment::cell_seed;
use offrl::mdp::*;
use offrl::ope::{corrected_losses, version_space, VsConfig};
use offrl::Exec;
use proptest::prelude::*;
use rand::Rng;

/// Sizes, discount and a seed for the rest of the instance.
fn instance() -> impl Strategy<Value = (usize, usize, f64, u64)> {
    (1usize..6, 1usize..4, 0.1f64..0.95, any::<u64>())
}

fn config() -> ProptestConfig {
    ProptestConfig { cases: 64, ..ProptestConfig::default() }
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn backup_contracts((ns, na, gamma, seed) in instance()) {
        let mut r = rng(seed);
        let mdp = random_mdp(&mut r, ns, na, gamma);
        let pi = random_policy(&mut r, ns, na);
        let f = random_function(&mut r, ns, na, 10.0);
        let g = random_function(&mut r, ns, na, 10.0);
        let tf = bellman_backup(&mdp, &f, Target::Policy(&pi)).unwrap();
        let tg = bellman_backup(&mdp, &g, Target::Policy(&pi)).unwrap();
        prop_assert!(tf.sup_dist(&tg) <= gamma * f.sup_dist(&g) + 1e-12);
        let of = bellman_backup(&mdp, &f, Target::Optimality).unwrap();
        let og = bellman_backup(&mdp, &g, Target::Optimality).unwrap();
        prop_assert!(of.sup_dist(&og) <= gamma * f.sup_dist(&g) + 1e-12);
    }

    #[test]
    fn sup_norm_residual_bounds_the_error((ns, na, gamma, seed) in instance()) {
        let mut r = rng(seed);
        let mdp = random_mdp(&mut r, ns, na, gamma);
        let pi = random_policy(&mut r, ns, na);
        let q = solve_q(&mdp, Target::Policy(&pi), 1e-13).unwrap();
        let f = random_function(&mut r, ns, na, 10.0);
        let tf = bellman_backup(&mdp, &f, Target::Policy(&pi)).unwrap();
        prop_assert!(f.sup_dist(&q) <= f.sup_dist(&tf) / (1.0 - gamma) + 1e-9);
    }

    #[test]
    fn occupancy_is_a_distribution_satisfying_the_flow((ns, na, gamma, seed) in instance(), horizon in 1usize..30) {
        let mut r = rng(seed);
        let mdp = random_mdp(&mut r, ns, na, gamma);
        let pi = random_policy(&mut r, ns, na);
        let occ = occupancy(&mdp, &pi, Some(horizon)).unwrap();
        let d = occ.dist();
        prop_assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        prop_assert!(d.iter().all(|&x| x >= 0.0));
        // Flow: d = (1-g) d0 pi + g (P d) pi.
        let mut inflow = vec![0.0; ns];
        for p in 0..ns * na {
            for (s2, &pr) in mdp.next_dist(p).iter().enumerate() {
                inflow[s2] += d[p] * pr;
            }
        }
        for s in 0..ns {
            for a in 0..na {
                let rhs = ((1.0 - gamma) * mdp.init_dist()[s] + gamma * inflow[s]) * pi.prob(s, a);
                prop_assert!((d[s * na + a] - rhs).abs() < 1e-10);
            }
        }
        prop_assert_eq!(occ.per_step().unwrap().len(), horizon);
        for step in occ.per_step().unwrap() {
            prop_assert!((step.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn return_is_the_occupancy_weighted_reward((ns, na, gamma, seed) in instance()) {
        let mut r = rng(seed);
        let mdp = random_mdp(&mut r, ns, na, gamma);
        let pi = random_policy(&mut r, ns, na);
        let d = occupancy(&mdp, &pi, None).unwrap();
        let via_occ = dot(d.dist(), mdp.reward()) / (1.0 - gamma);
        let j = policy_return(&mdp, &pi, None);
        prop_assert!((j - via_occ).abs() <= 1e-9 * j.abs().max(1.0));
    }

    #[test]
    fn mixture_return_is_the_weighted_average((ns, na, gamma, seed) in instance(), k in 1usize..5) {
        let mut r = rng(seed);
        let mdp = random_mdp(&mut r, ns, na, gamma);
        let comps: Vec<StationaryPolicy> = (0..k).map(|_| random_policy(&mut r, ns, na)).collect();
        let w = simplex(&mut r, k);
        let mix = MixturePolicy::new(comps.iter().cloned().map(Policy::Stationary).collect(), w.clone()).unwrap();
        prop_assert!((mix.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let expected: f64 = comps.iter().zip(&w).map(|(c, wi)| wi * policy_return(&mdp, c, None)).sum();
        prop_assert!((policy_return(&mdp, &mix, None) - expected).abs() < 1e-9);
    }

    #[test]
    fn coefficient_chain((ns, na, gamma, seed) in instance()) {
        let mut r = rng(seed);
        let mdp = random_mdp(&mut r, ns, na, gamma);
        let pi = random_policy(&mut r, ns, na);
        let d = simplex(&mut r, ns * na);
        let d_pi = occupancy(&mdp, &pi, None).unwrap();
        let class = FunctionClass::finite((0..4).map(|_| random_function(&mut r, ns, na, 5.0)).collect()).unwrap();
        let ci = c_inf(d_pi.dist(), &d);
        let sq = c_sq(&class, &mdp, &pi, &d).unwrap().value;
        let avg = c_avg(&class, &mdp, &pi, &d).unwrap().value;
        let chi = chi_sq_coverage(d_pi.dist(), &d);
        prop_assert!(ci >= 1.0 - 1e-12);
        prop_assert!(avg >= 0.0 && sq >= 0.0 && chi >= 0.0);
        prop_assert!(avg <= sq * (1.0 + 1e-9) + 1e-12);
        prop_assert!(sq <= ci * (1.0 + 1e-9));
        prop_assert!(chi <= ci * (1.0 + 1e-9));
    }

    #[test]
    fn norm_change_is_bounded_by_the_density_ratio(k in 1usize..12, seed in any::<u64>()) {
        let mut r = rng(seed);
        let nu = simplex(&mut r, k);
        let mu = simplex(&mut r, k);
        let xi: Vec<f64> = (0..k).map(|_| r.gen_range(-5.0..5.0)).collect();
        let sq = |w: &[f64]| -> f64 { w.iter().zip(&xi).map(|(m, x)| m * x * x).sum() };
        prop_assert!(sq(&nu) <= c_inf(&nu, &mu) * sq(&mu) + 1e-10);
    }

    #[test]
    fn linear_projection_is_idempotent_and_non_expansive((ns, na, _g, seed) in instance(), dim in 1usize..4) {
        let mut r = rng(seed);
        let n = ns * na;
        let dim = dim.min(n);
        let feats: Vec<f64> = (0..n * dim).map(|_| r.gen_range(-1.0..1.0)).collect();
        let class = FunctionClass::linear(FeatureMap::from_features(ns, na, dim, feats).unwrap());
        let w = simplex(&mut r, n);
        let f = random_function(&mut r, ns, na, 10.0);
        let g = random_function(&mut r, ns, na, 10.0);
        let pf = project(&class, &f, &w).unwrap().f;
        let pg = project(&class, &g, &w).unwrap().f;
        let ppf = project(&class, &pf, &w).unwrap().f;
        let scale = 1e-8 * (1.0 + f.sup_norm());
        prop_assert!(pf.sup_dist(&ppf) <= scale);
        let diff = |a: &ValueFunction, b: &ValueFunction| a.zip_with(b, |x, y| x - y).norm2_under(&w);
        prop_assert!(diff(&pf, &pg) <= diff(&f, &g) * (1.0 + 1e-9) + 1e-9);
    }

    #[test]
    fn piecewise_projection_is_a_sup_norm_non_expansion((ns, na, _g, seed) in instance(), cells in 1usize..5) {
        let mut r = rng(seed);
        let n = ns * na;
        let cells = cells.min(n);
        let mut cell_of: Vec<usize> = (0..n).map(|p| if p < cells { p } else { r.gen_range(0..cells) }).collect();
        // Shuffle labels so cells are not contiguous in pair order.
        for i in (1..n).rev() {
            cell_of.swap(i, r.gen_range(0..=i));
        }
        let class = FunctionClass::PiecewiseConstant { partition: Partition::new(ns, na, cell_of).unwrap() };
        let mut w = simplex(&mut r, n);
        w[r.gen_range(0..n)] = 0.0;
        let f = random_function(&mut r, ns, na, 10.0);
        let g = random_function(&mut r, ns, na, 10.0);
        let pf = project(&class, &f, &w).unwrap().f;
        let pg = project(&class, &g, &w).unwrap().f;
        prop_assert!(pf.sup_dist(&project(&class, &pf, &w).unwrap().f) <= 1e-9);
        prop_assert!(pf.sup_dist(&pg) <= f.sup_dist(&g) + 1e-9);
    }

    #[test]
    fn pair_partition_refines_both_and_approximates((ns, na, _g, seed) in instance(), ratio in 1.0f64..25.0) {
        let mut r = rng(seed);
        let v_max = 10.0;
        let eps = v_max / ratio;
        let f1 = random_function(&mut r, ns, na, v_max).map(|x| x.abs());
        let f2 = random_function(&mut r, ns, na, v_max).map(|x| x.abs());
        let joint = bvft_partition(&f1, &f2, eps, v_max).unwrap();
        prop_assert!(joint.refines(&bvft_partition(&f1, &f1, eps, v_max).unwrap()));
        prop_assert!(joint.refines(&bvft_partition(&f2, &f2, eps, v_max).unwrap()));
        // Each function is within eps of its cell midrange.
        for f in [&f1, &f2] {
            for cell in joint.members() {
                let vals: Vec<f64> = cell.iter().map(|&p| f.values()[p]).collect();
                let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                prop_assert!((hi - lo) / 2.0 <= eps + 1e-12);
            }
        }
    }

    #[test]
    fn version_space_keeps_its_minimizer((ns, na, _g, seed) in instance(), m in 1usize..6, n in 1usize..200) {
        let mut r = rng(seed);
        let gamma = 0.3;
        let mdp = random_mdp(&mut r, ns, na, gamma);
        let pi = random_policy(&mut r, ns, na);
        let v_max = mdp.v_max();
        let members: Vec<ValueFunction> = (0..m).map(|_| random_function(&mut r, ns, na, v_max).map(|x| x.abs())).collect();
        let data = sample_tuples(&mdp, &OccupancyMeasure::uniform(ns, na), n, seed);
        let losses = corrected_losses(&mdp.spec(), &members, &data, &pi);
        prop_assert!(losses.iter().all(|&l| l >= 0.0 && l.is_finite()));
        let class = FunctionClass::finite(members).unwrap();
        let vs = version_space(&mdp.spec(), &class, &data, &pi, VsConfig::default()).unwrap();
        prop_assert!(vs.flags[vs.min_index]);
        for (l, &flag) in vs.losses.iter().zip(&vs.flags) {
            prop_assert_eq!(flag, *l <= vs.threshold);
        }
    }

    #[test]
    fn sampling_is_schedule_independent((ns, na, gamma, seed) in instance(), n in 0usize..500, workers in 1usize..5) {
        let mut r = rng(seed);
        let mdp = random_mdp(&mut r, ns, na, gamma);
        let d = OccupancyMeasure::new(ns, na, simplex(&mut r, ns * na)).unwrap();
        let a = sample_tuples_with(Exec::Sequential, &mdp, &d, n, seed);
        let b = sample_tuples_with(Exec::with_workers(workers), &mdp, &d, n, seed);
        prop_assert_eq!(&a.tuples, &b.tuples);
        prop_assert!(a.tuples.iter().all(|t| t.s < ns && t.a < na && t.s_next < ns && t.r >= 0.0 && t.r <= mdp.r_max()));
    }

    #[test]
    fn cell_seeds_are_pure(master in any::<u64>(), n in any::<usize>(), k in any::<usize>(), name in "[a-z]{1,8}") {
        prop_assert_eq!(cell_seed(master, &name, "fqe", n, k), cell_seed(master, &name, "fqe", n, k));
        prop_assert_ne!(cell_seed(master, &name, "fqe", n, k), cell_seed(master, &name, "brm", n, k));
    }
}
