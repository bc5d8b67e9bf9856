use nalgebra::{DMatrix, DVector};

use super::{next_values, plug_in_return, Estimate};
use crate::data::TupleDataset;
use crate::error::{Error, Result};
use crate::function_class::{fit_least_squares, FeatureMap, FunctionClass};
use crate::linalg;
use crate::mdp::{state_values, ProblemSpec, StationaryPolicy, TabularMdp, ValueFunction};

/// Empirical moments of a linear class under the data.
#[derive(Clone, Debug)]
pub(crate) struct LinearStats {
    /// `E_D[phi phi^T]`.
    pub sigma: DMatrix<f64>,
    /// `E_D[phi phi(s', pi)^T]`.
    pub cross: DMatrix<f64>,
    /// `E_D[phi r]`.
    pub b: DVector<f64>,
    /// `E_{d0}[phi(s, pi)]`.
    pub nu0: DVector<f64>,
}

impl LinearStats {
    pub fn new(spec: &ProblemSpec, phi: &FeatureMap, tuples: &TupleDataset, pi: &StationaryPolicy) -> Self {
        let d = phi.dim();
        let next_phi: Vec<DVector<f64>> = (0..spec.n_states)
            .map(|s| {
                let mut v = DVector::zeros(d);
                for a in 0..spec.n_actions {
                    let p = pi.prob(s, a);
                    if p != 0.0 {
                        v += phi.phi_vec(s * spec.n_actions + a) * p;
                    }
                }
                v
            })
            .collect();
        let mut sigma = DMatrix::zeros(d, d);
        let mut cross = DMatrix::zeros(d, d);
        let mut b = DVector::zeros(d);
        for t in &tuples.tuples {
            let x = phi.phi_vec(t.s * spec.n_actions + t.a);
            sigma += &x * x.transpose();
            cross += &x * next_phi[t.s_next].transpose();
            b += &x * t.r;
        }
        let w = 1.0 / tuples.len().max(1) as f64;
        LinearStats {
            sigma: linalg::symmetrize(&(sigma * w)),
            cross: cross * w,
            b: b * w,
            nu0: phi.initial_mean(&spec.init_dist, pi),
        }
    }

    /// `A = E_D[phi (phi - gamma phi')^T]`.
    pub fn a(&self, gamma: f64) -> DMatrix<f64> {
        &self.sigma - &self.cross * gamma
    }
}

/// `L_D(g; f, pi) = E_D[(g(s,a) - r - gamma f(s', pi))^2]`.
pub fn td_loss(spec: &ProblemSpec, tuples: &TupleDataset, g: &ValueFunction, f: &ValueFunction, pi: &StationaryPolicy) -> f64 {
    let next = next_values(tuples, f, pi);
    let n = tuples.len().max(1) as f64;
    tuples
        .tuples
        .iter()
        .zip(next)
        .map(|(t, v)| (g.get(t.s, t.a) - t.r - spec.gamma * v).powi(2))
        .sum::<f64>()
        / n
}

/// Exact `L(g; f, pi)` under `(s,a) ~ d_d`, integrating the reward law and
/// next state.
pub fn population_td_loss(mdp: &TabularMdp, d_d: &[f64], g: &ValueFunction, f: &ValueFunction, pi: &StationaryPolicy) -> f64 {
    let v = state_values(f, pi);
    let gamma = mdp.gamma();
    let mut total = 0.0;
    for (p, &w) in d_d.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let rewards: Vec<(f64, f64)> = match mdp.reward_noise() {
            Some(noise) => noise[p].iter().map(|o| (o.value, o.prob)).collect(),
            None => vec![(mdp.reward()[p], 1.0)],
        };
        let mut inner = 0.0;
        for (s2, &q) in mdp.next_dist(p).iter().enumerate() {
            if q == 0.0 {
                continue;
            }
            for &(r, pr) in &rewards {
                inner += q * pr * (g.values()[p] - r - gamma * v[s2]).powi(2);
            }
        }
        total += w * inner;
    }
    total
}

#[derive(Clone, Debug)]
pub struct BrmFit {
    pub f: ValueFunction,
    pub estimate: Estimate,
    /// Corrected loss of every member (finite classes).
    pub losses: Option<Vec<f64>>,
}

/// Bellman residual minimization with the double-sampling correction
/// `E(f) = L(f; f) - min_g L(g; f)`.
///
/// Finite `F` is enumerated (ties to the lowest index) against any `G`.
/// Linear or piecewise-constant `F` with `G = F` (pass `None`) has the
/// closed form `(A theta - B)^T S^{-1} (A theta - B)`, minimized by LSTDQ.
pub fn brm(
    spec: &ProblemSpec,
    class_f: &FunctionClass,
    class_g: Option<&FunctionClass>,
    tuples: &TupleDataset,
    pi: &StationaryPolicy,
) -> Result<BrmFit> {
    let class_g = class_g.unwrap_or(class_f);
    match class_f {
        FunctionClass::Finite { members } => {
            let losses = members
                .iter()
                .map(|f| corrected_loss(spec, class_g, tuples, f, pi))
                .collect::<Result<Vec<f64>>>()?;
            let best = argmin(&losses);
            let f = members[best].clone();
            let estimate = Estimate::new(plug_in_return(spec, &f, pi)).with("e_hat", losses[best]).with("index", best as f64);
            Ok(BrmFit { f, estimate, losses: Some(losses) })
        }
        other => {
            if class_g != class_f {
                return Err(Error::Unsupported("linear BRM needs G = F".into()));
            }
            let phi = other.as_linear().expect("linear view");
            let fit = lstdq(spec, &phi, tuples, pi, 0.0)?;
            let estimate = fit.estimate.clone().with("e_hat", 0.0);
            Ok(BrmFit { f: fit.f, estimate, losses: None })
        }
    }
}

pub(crate) fn argmin(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x < xs[best] {
            best = i;
        }
    }
    best
}

/// `L(f; f) - min_{g in G} L(g; f)` on the data.
pub(crate) fn corrected_loss(
    spec: &ProblemSpec,
    class_g: &FunctionClass,
    tuples: &TupleDataset,
    f: &ValueFunction,
    pi: &StationaryPolicy,
) -> Result<f64> {
    let own = td_loss(spec, tuples, f, f, pi);
    let best_g = match class_g {
        FunctionClass::Finite { members } => members
            .iter()
            .map(|g| td_loss(spec, tuples, g, f, pi))
            .fold(f64::INFINITY, f64::min),
        other => {
            let next = next_values(tuples, f, pi);
            let targets: Vec<f64> = tuples.tuples.iter().zip(next).map(|(t, v)| t.r + spec.gamma * v).collect();
            let g = fit_least_squares(other, tuples, &targets, 0.0)?.f;
            td_loss(spec, tuples, &g, f, pi)
        }
    };
    Ok(own - best_g)
}

#[derive(Clone, Debug)]
pub struct LstdqFit {
    pub theta: Vec<f64>,
    pub f: ValueFunction,
    pub estimate: Estimate,
}

/// `theta = A^{-1} B` with `A = E_D[phi (phi - gamma phi(s', pi))^T] + ridge I`
/// and `B = E_D[phi r]`.
pub fn lstdq(spec: &ProblemSpec, phi: &FeatureMap, tuples: &TupleDataset, pi: &StationaryPolicy, ridge: f64) -> Result<LstdqFit> {
    let stats = LinearStats::new(spec, phi, tuples, pi);
    let d = phi.dim();
    let a = stats.a(spec.gamma) + DMatrix::identity(d, d) * ridge;
    let smin = linalg::sigma_min(&a);
    if smin < 1e-10 {
        return Err(Error::IllConditioned(smin));
    }
    let theta = linalg::solve(&a, &stats.b)?;
    let f = phi.eval(theta.as_slice());
    let estimate = Estimate::new(stats.nu0.dot(&theta)).with("sigma_min_a", smin);
    Ok(LstdqFit { theta: theta.iter().cloned().collect(), f, estimate })
}

/// Population `A = S_D - gamma E_{d_D}[phi phi(s', pi)^T]` and
/// `B = E_{d_D}[phi R]`.
pub fn lstdq_population(mdp: &TabularMdp, phi: &FeatureMap, pi: &StationaryPolicy, d_d: &[f64]) -> (DMatrix<f64>, DVector<f64>) {
    let na = mdp.n_actions();
    let d = phi.dim();
    let next_phi: Vec<DVector<f64>> = (0..mdp.n_states())
        .map(|s| (0..na).fold(DVector::zeros(d), |acc, a| acc + phi.phi_vec(s * na + a) * pi.prob(s, a)))
        .collect();
    let mut a = DMatrix::zeros(d, d);
    let mut b = DVector::zeros(d);
    for (p, &w) in d_d.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let x = phi.phi_vec(p);
        let mut expected_next = DVector::zeros(d);
        for (s2, &q) in mdp.next_dist(p).iter().enumerate() {
            if q != 0.0 {
                expected_next += &next_phi[s2] * q;
            }
        }
        a += &x * (&x - expected_next * mdp.gamma()).transpose() * w;
        b += &x * (mdp.reward()[p] * w);
    }
    (a, b)
}
