use nalgebra::{DMatrix, DVector};

use super::{MixturePolicy, NonstationaryPolicy, OccupancyMeasure, Policy, StationaryPolicy, TabularMdp, ValueFunction};
use crate::error::{Error, Result};

/// Which Bellman operator to apply.
#[derive(Clone, Copy, Debug)]
pub enum Target<'a> {
    Policy(&'a StationaryPolicy),
    Optimality,
}

/// Borrowed view over any policy kind.
#[derive(Clone, Copy, Debug)]
pub enum PolicyRef<'a> {
    Stationary(&'a StationaryPolicy),
    Nonstationary(&'a NonstationaryPolicy),
    Mixture(&'a MixturePolicy),
}

impl<'a> From<&'a StationaryPolicy> for PolicyRef<'a> {
    fn from(p: &'a StationaryPolicy) -> Self {
        PolicyRef::Stationary(p)
    }
}
impl<'a> From<&'a NonstationaryPolicy> for PolicyRef<'a> {
    fn from(p: &'a NonstationaryPolicy) -> Self {
        PolicyRef::Nonstationary(p)
    }
}
impl<'a> From<&'a MixturePolicy> for PolicyRef<'a> {
    fn from(p: &'a MixturePolicy) -> Self {
        PolicyRef::Mixture(p)
    }
}
impl<'a> From<&'a Policy> for PolicyRef<'a> {
    fn from(p: &'a Policy) -> Self {
        match p {
            Policy::Stationary(p) => PolicyRef::Stationary(p),
            Policy::Nonstationary(p) => PolicyRef::Nonstationary(p),
            Policy::Mixture(p) => PolicyRef::Mixture(p),
        }
    }
}

fn check_f(mdp: &TabularMdp, f: &ValueFunction) -> Result<()> {
    if f.n_states() != mdp.n_states() || f.n_actions() != mdp.n_actions() {
        return Err(Error::ShapeMismatch(format!(
            "value function is {}x{}, MDP is {}x{}",
            f.n_states(),
            f.n_actions(),
            mdp.n_states(),
            mdp.n_actions()
        )));
    }
    Ok(())
}

fn check_pi(mdp: &TabularMdp, pi: &StationaryPolicy) -> Result<()> {
    if pi.n_states() != mdp.n_states() || pi.n_actions() != mdp.n_actions() {
        return Err(Error::ShapeMismatch("policy shape differs from MDP".into()));
    }
    Ok(())
}

/// `f(s, pi) = sum_a pi(a|s) f(s,a)` for every state.
pub fn state_values(f: &ValueFunction, pi: &StationaryPolicy) -> Vec<f64> {
    (0..f.n_states())
        .map(|s| f.row(s).iter().zip(pi.row(s)).map(|(v, p)| v * p).sum())
        .collect()
}

fn state_max(f: &ValueFunction) -> Vec<f64> {
    (0..f.n_states()).map(|s| f.row(s).iter().cloned().fold(f64::NEG_INFINITY, f64::max)).collect()
}

fn expect_over_next(mdp: &TabularMdp, v: &[f64]) -> Vec<f64> {
    (0..mdp.n_pairs())
        .map(|p| mdp.next_dist(p).iter().zip(v).map(|(q, x)| q * x).sum())
        .collect()
}

/// `E[f(s', pi) | s, a]` for every pair.
pub fn expected_next_value(mdp: &TabularMdp, f: &ValueFunction, pi: &StationaryPolicy) -> Vec<f64> {
    expect_over_next(mdp, &state_values(f, pi))
}

/// Apply `T^pi` or the optimality operator `T` once, exactly.
pub fn bellman_backup(mdp: &TabularMdp, f: &ValueFunction, target: Target<'_>) -> Result<ValueFunction> {
    check_f(mdp, f)?;
    let v = match target {
        Target::Policy(pi) => {
            check_pi(mdp, pi)?;
            state_values(f, pi)
        }
        Target::Optimality => state_max(f),
    };
    let next = expect_over_next(mdp, &v);
    let g = mdp.gamma();
    let values = mdp.reward().iter().zip(next).map(|(r, x)| r + g * x).collect();
    Ok(ValueFunction::raw(mdp.n_states(), mdp.n_actions(), values))
}

/// `P_pi[(s,a), (s',a')] = P(s'|s,a) pi(a'|s')`.
pub fn policy_matrix(mdp: &TabularMdp, pi: &StationaryPolicy) -> DMatrix<f64> {
    let (ns, na) = (mdp.n_states(), mdp.n_actions());
    let n = ns * na;
    DMatrix::from_fn(n, n, |p, q| {
        let (s2, a2) = (q / na, q % na);
        mdp.next_dist(p)[s2] * pi.prob(s2, a2)
    })
}

/// Exact `Q^pi` by a direct linear solve, or `Q*` by value iteration
/// stopped once successive iterates differ by at most `tol (1-gamma)/gamma`.
pub fn solve_q(mdp: &TabularMdp, target: Target<'_>, tol: f64) -> Result<ValueFunction> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParams("tol must be positive".into()));
    }
    let (ns, na) = (mdp.n_states(), mdp.n_actions());
    let g = mdp.gamma();
    match target {
        Target::Policy(pi) => {
            check_pi(mdp, pi)?;
            let n = ns * na;
            let a = DMatrix::<f64>::identity(n, n) - policy_matrix(mdp, pi) * g;
            let r = DVector::from_column_slice(mdp.reward());
            let q = a.lu().solve(&r).ok_or(Error::SingularGram)?;
            Ok(ValueFunction::raw(ns, na, q.iter().cloned().collect()))
        }
        Target::Optimality => {
            let mut f = ValueFunction::raw(ns, na, mdp.reward().to_vec());
            if g == 0.0 {
                return Ok(f);
            }
            let stop = tol * (1.0 - g) / g;
            loop {
                let next = bellman_backup(mdp, &f, Target::Optimality)?;
                let delta = next.sup_dist(&f);
                f = next;
                if delta <= stop {
                    return Ok(f);
                }
            }
        }
    }
}

/// Greedy policy; ties go to the lowest action index.
pub fn greedy(f: &ValueFunction) -> StationaryPolicy {
    let actions: Vec<usize> = (0..f.n_states())
        .map(|s| {
            let row = f.row(s);
            let mut best = 0;
            for a in 1..row.len() {
                if row[a] > row[best] {
                    best = a;
                }
            }
            best
        })
        .collect();
    StationaryPolicy::deterministic(f.n_actions(), &actions).expect("actions in range")
}

fn initial_pairs(mdp: &TabularMdp, pi: &StationaryPolicy) -> Vec<f64> {
    let na = mdp.n_actions();
    (0..mdp.n_pairs()).map(|p| mdp.init_dist()[p / na] * pi.prob(p / na, p % na)).collect()
}

/// `d_{t+1}(s',a') = sum_{s,a} d_t(s,a) P(s'|s,a) pi(a'|s')`.
fn step_forward(mdp: &TabularMdp, d: &[f64], pi: &StationaryPolicy) -> Vec<f64> {
    let (ns, na) = (mdp.n_states(), mdp.n_actions());
    let mut state = vec![0.0; ns];
    for (p, &w) in d.iter().enumerate() {
        if w != 0.0 {
            for (s2, q) in mdp.next_dist(p).iter().enumerate() {
                state[s2] += w * q;
            }
        }
    }
    (0..ns * na).map(|q| state[q / na] * pi.prob(q / na, q % na)).collect()
}

/// Normalized discounted occupancy.
///
/// Stationary policies solve the flow equations exactly; `horizon` adds the
/// per-step distributions `d_0 .. d_{H-1}`. A nonstationary policy of length
/// `K` is an episode truncated after `K` steps, so its measure is the
/// discounted average of `d_0 .. d_{K-1}` renormalized by `1 - gamma^K`.
/// Mixtures average their components.
pub fn occupancy<'a>(
    mdp: &TabularMdp,
    pi: impl Into<PolicyRef<'a>>,
    horizon: Option<usize>,
) -> Result<OccupancyMeasure> {
    let (ns, na) = (mdp.n_states(), mdp.n_actions());
    let g = mdp.gamma();
    match pi.into() {
        PolicyRef::Stationary(pi) => {
            check_pi(mdp, pi)?;
            let n = ns * na;
            let nu0 = DVector::from_vec(initial_pairs(mdp, pi));
            let a = DMatrix::<f64>::identity(n, n) - policy_matrix(mdp, pi).transpose() * g;
            let d = a.lu().solve(&(nu0.clone() * (1.0 - g))).ok_or(Error::SingularGram)?;
            let dist: Vec<f64> = d.iter().map(|&x| x.max(0.0)).collect();
            let per_step = horizon.map(|h| {
                let mut steps = Vec::with_capacity(h);
                let mut cur: Vec<f64> = nu0.iter().cloned().collect();
                for _ in 0..h {
                    let next = step_forward(mdp, &cur, pi);
                    steps.push(std::mem::replace(&mut cur, next));
                }
                steps
            });
            Ok(OccupancyMeasure::raw(ns, na, dist, per_step))
        }
        PolicyRef::Nonstationary(pi) => {
            let k = pi.horizon();
            check_pi(mdp, pi.at_time(0))?;
            let mut steps = Vec::with_capacity(k);
            let mut cur = initial_pairs(mdp, pi.at_time(0));
            for t in 0..k {
                let next = if t + 1 < k { step_forward(mdp, &cur, pi.at_time(t + 1)) } else { Vec::new() };
                steps.push(std::mem::replace(&mut cur, next));
            }
            let mut dist = vec![0.0; ns * na];
            let mut w = 1.0;
            for d in &steps {
                for (x, y) in dist.iter_mut().zip(d) {
                    *x += w * y;
                }
                w *= g;
            }
            let z: f64 = dist.iter().sum();
            dist.iter_mut().for_each(|x| *x /= z);
            Ok(OccupancyMeasure::raw(ns, na, dist, Some(steps)))
        }
        PolicyRef::Mixture(m) => {
            let parts: Vec<OccupancyMeasure> = m
                .components()
                .iter()
                .map(|c| occupancy(mdp, c, horizon))
                .collect::<Result<_>>()?;
            let mut dist = vec![0.0; ns * na];
            for (d, &w) in parts.iter().zip(m.weights()) {
                for (x, y) in dist.iter_mut().zip(d.dist()) {
                    *x += w * y;
                }
            }
            Ok(OccupancyMeasure::raw(ns, na, dist, None))
        }
    }
}

/// Exact return `J(pi)`, or the plug-in `J_f(pi) = E_{d0}[f(s, pi)]`.
///
/// Nonstationary policies use the truncated return over their horizon and,
/// with `f`, the first-acting policy. Panics on shape mismatch.
pub fn policy_return<'a>(mdp: &TabularMdp, pi: impl Into<PolicyRef<'a>>, f: Option<&ValueFunction>) -> f64 {
    let d0 = mdp.init_dist();
    let at_start = |q: &ValueFunction, p: &StationaryPolicy| -> f64 {
        state_values(q, p).iter().zip(d0).map(|(v, w)| v * w).sum()
    };
    match pi.into() {
        PolicyRef::Stationary(p) => match f {
            Some(f) => at_start(f, p),
            None => at_start(&solve_q(mdp, Target::Policy(p), 1e-12).expect("policy matches MDP"), p),
        },
        PolicyRef::Nonstationary(p) => match f {
            Some(f) => at_start(f, p.at_time(0)),
            None => {
                let qs = finite_horizon_values(mdp, p, p.horizon()).expect("policy matches MDP");
                at_start(qs.last().expect("K >= 1"), p.at_time(0))
            }
        },
        PolicyRef::Mixture(m) => m
            .components()
            .iter()
            .zip(m.weights())
            .map(|(c, w)| w * policy_return(mdp, c, f))
            .sum(),
    }
}

/// `Q_1 .. Q_K` with `Q_0 = 0` and `Q_k = T^{pi_{k-1}} Q_{k-1}`, where
/// `pi_j = steps[j-1]`. Needs at least `K - 1` steps.
pub fn finite_horizon_values(mdp: &TabularMdp, pi: &NonstationaryPolicy, k: usize) -> Result<Vec<ValueFunction>> {
    if k == 0 {
        return Err(Error::InvalidParams("K must be at least 1".into()));
    }
    if pi.steps().len() + 1 < k {
        return Err(Error::InvalidParams(format!("policy has {} steps, K = {k} needs {}", pi.steps().len(), k - 1)));
    }
    let (ns, na) = (mdp.n_states(), mdp.n_actions());
    let mut out = Vec::with_capacity(k);
    let mut q = ValueFunction::raw(ns, na, mdp.reward().to_vec());
    out.push(q.clone());
    for j in 1..k {
        q = bellman_backup(mdp, &q, Target::Policy(&pi.steps()[j - 1]))?;
        out.push(q.clone());
    }
    Ok(out)
}
