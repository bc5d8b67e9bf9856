use super::{trace_row, OptResult};
use crate::data::TupleDataset;
use crate::error::{Error, Result};
use crate::function_class::FunctionClass;
use crate::linalg;
use crate::mdp::{ProblemSpec, StationaryPolicy, ValueFunction};
use crate::ope::{brm_stats, corrected_losses, plug_in_return, version_space, vs_interval, VsConfig};

/// Picks the policy with the largest version-space lower bound; ties go to
/// the first index. The threshold is union-bounded over the policy list.
pub fn pessimistic_search(
    spec: &ProblemSpec,
    policies: &[StationaryPolicy],
    class: &FunctionClass,
    tuples: &TupleDataset,
    cfg: VsConfig,
) -> Result<OptResult> {
    if policies.is_empty() {
        return Err(Error::InvalidParams("empty policy class".into()));
    }
    let cfg = VsConfig { n_policies: policies.len(), ..cfg };
    let mut best: Option<(f64, usize, crate::ope::Estimate)> = None;
    let mut trace = Vec::with_capacity(policies.len());
    for (i, pi) in policies.iter().enumerate() {
        let vs = version_space(spec, class, tuples, pi, cfg)?;
        let est = vs_interval(&vs, spec);
        let lower = est.lower.expect("interval has a lower end");
        trace.push(trace_row(&[
            ("policy", i as f64),
            ("lower", lower),
            ("upper", est.upper.expect("interval has an upper end")),
            ("point", est.point),
        ]));
        if best.as_ref().map_or(true, |(b, _, _)| lower > *b) {
            best = Some((lower, i, est));
        }
    }
    let (_, idx, est) = best.expect("non-empty");
    let mut out = OptResult::new(policies[idx].clone().into(), est.with("policy_index", idx as f64));
    out.trace = trace;
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct FminResult {
    pub f: ValueFunction,
    pub j: f64,
    pub e_hat: f64,
    /// Multiplier chosen on the linear path.
    pub lambda: Option<f64>,
    /// False when no grid point met the threshold.
    pub feasible: bool,
}

/// Geometric grid from 1e-3 to 1e6.
pub fn default_lambda_grid() -> Vec<f64> {
    (0..=270).map(|i| 10f64.powf(-3.0 + i as f64 / 30.0)).collect()
}

/// Most pessimistic member of the version space `{f : E(f) <= eps0}`.
///
/// Finite classes are enumerated (the loss minimizer always counts as
/// feasible). Linear classes sweep `min_theta nu^T theta + lambda E(theta)`,
/// whose solution is `theta = A^{-1}(B - S A^{-T} nu / (2 lambda))` with
/// `E = nu^T A^{-1} S A^{-T} nu / (4 lambda^2)`, and keep the grid point with
/// the largest loss not above `eps0`.
pub fn f_min_oracle(
    spec: &ProblemSpec,
    class: &FunctionClass,
    tuples: &TupleDataset,
    pi: &StationaryPolicy,
    eps0: f64,
    lambda_grid: &[f64],
) -> Result<FminResult> {
    match class {
        FunctionClass::Finite { members } => {
            let losses = corrected_losses(spec, members, tuples, pi);
            let min_i = crate::ope::argmin_index(&losses);
            let mut best: Option<(f64, usize)> = None;
            for (i, f) in members.iter().enumerate() {
                if i != min_i && losses[i] > eps0 {
                    continue;
                }
                let j = plug_in_return(spec, f, pi);
                if best.map_or(true, |(b, _)| j < b) {
                    best = Some((j, i));
                }
            }
            let (j, i) = best.expect("minimizer is feasible");
            Ok(FminResult { f: members[i].clone(), j, e_hat: losses[i], lambda: None, feasible: true })
        }
        other => {
            if lambda_grid.is_empty() {
                return Err(Error::InvalidParams("empty lambda grid".into()));
            }
            let phi = other.as_linear().expect("linear view");
            let stats = brm_stats(spec, &phi, tuples, pi);
            let a = stats.a(spec.gamma);
            let a_inv = linalg::inverse(&a).map_err(|_| Error::IllConditioned(linalg::sigma_min(&a)))?;
            let base = &a_inv * &stats.b;
            let dir: nalgebra::DVector<f64> = &a_inv * &stats.sigma * a_inv.transpose() * &stats.nu0;
            let quad = stats.nu0.dot(&dir);
            let solve = |lambda: f64| {
                let theta = &base - &dir * (1.0 / (2.0 * lambda));
                let e = quad / (4.0 * lambda * lambda);
                (theta, e)
            };
            let mut chosen: Option<(f64, f64)> = None;
            for &lambda in lambda_grid {
                let (_, e) = solve(lambda);
                if e <= eps0 && chosen.map_or(true, |(_, be)| e > be) {
                    chosen = Some((lambda, e));
                }
            }
            let (lambda, feasible) = match chosen {
                Some((l, _)) => (l, true),
                None => {
                    log::warn!("no lambda meets eps0 = {eps0}; using the largest grid value");
                    (lambda_grid.iter().cloned().fold(f64::NEG_INFINITY, f64::max), false)
                }
            };
            let (theta, e) = solve(lambda);
            let f = phi.eval(theta.as_slice());
            let j = stats.nu0.dot(&theta);
            Ok(FminResult { f, j, e_hat: e, lambda: Some(lambda), feasible })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::sample_tuples;
    use crate::function_class::FeatureMap;
    use crate::mdp::{OccupancyMeasure, TabularMdp};
    use nalgebra::{DMatrix, DVector};

    fn chain() -> TabularMdp {
        let t = vec![0.7, 0.3, 0.2, 0.8, 0.5, 0.5, 0.1, 0.9];
        TabularMdp::new(2, 2, t, vec![0.2, 1.0, 0.0, 0.6], 0.8, vec![0.5, 0.5], 1.0).unwrap()
    }

    #[test]
    fn linear_path_loss_matches_closed_form() {
        let mdp = chain();
        let spec = mdp.spec();
        let pi = StationaryPolicy::uniform(2, 2);
        let d = OccupancyMeasure::uniform(2, 2);
        let tuples = sample_tuples(&mdp, &d, 400, 3);
        let phi = FeatureMap::from_features(2, 2, 2, vec![1.0, 0.0, 0.5, 0.5, 0.0, 1.0, 0.3, 0.7]).unwrap();
        let class = FunctionClass::linear(phi.clone());
        let r = f_min_oracle(&spec, &class, &tuples, &pi, 0.01, &default_lambda_grid()).unwrap();
        assert!(r.feasible && r.e_hat <= 0.01);
        // Recompute (A theta - B)^T S^{-1} (A theta - B) from the returned values.
        let stats = brm_stats(&spec, &phi, &tuples, &pi);
        let a: DMatrix<f64> = stats.a(spec.gamma);
        let m = phi.matrix();
        let theta = linalg::solve(&(m.transpose() * &m), &(m.transpose() * DVector::from_column_slice(r.f.values()))).unwrap();
        let res = &a * &theta - &stats.b;
        let e = res.dot(&linalg::solve(&stats.sigma, &res).unwrap());
        assert!((e - r.e_hat).abs() < 1e-9 * (1.0 + e));
        assert!((stats.nu0.dot(&theta) - r.j).abs() < 1e-9);
    }

    #[test]
    fn finite_path_prefers_lower_return() {
        let mdp = chain();
        let spec = mdp.spec();
        let pi = StationaryPolicy::uniform(2, 2);
        let q = crate::mdp::solve_q(&mdp, crate::mdp::Target::Policy(&pi), 1e-12).unwrap();
        let class = FunctionClass::finite(vec![q.clone(), q.add_scalar(-1.0)]).unwrap();
        let tuples = sample_tuples(&mdp, &OccupancyMeasure::uniform(2, 2), 200, 1);
        let r = f_min_oracle(&spec, &class, &tuples, &pi, 1e9, &[]).unwrap();
        assert_eq!(r.f, q.add_scalar(-1.0));
    }
}
