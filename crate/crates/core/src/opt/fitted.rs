use super::{trace_row, OptResult};
use crate::data::TupleDataset;
use crate::error::{Error, Result};
use crate::function_class::{fit_least_squares, FunctionClass};
use crate::mdp::{greedy, policy_return, solve_q, ProblemSpec, StationaryPolicy, TabularMdp, Target, ValueFunction};
use crate::ope::{fqe, Estimate};

/// Fitted Q iteration from `f_0 = 0` with targets `r + gamma max_a' f(s', a')`;
/// outputs the greedy policy of `f_K`.
pub fn fqi(spec: &ProblemSpec, class: &FunctionClass, tuples: &TupleDataset, k: usize, ridge: f64) -> Result<OptResult> {
    if k == 0 {
        return Err(Error::InvalidParams("FQI needs K >= 1".into()));
    }
    let mut f = ValueFunction::zeros(spec.n_states, spec.n_actions);
    let mut trace = Vec::with_capacity(k);
    for i in 0..k {
        let vmax: Vec<f64> = (0..spec.n_states).map(|s| f.row(s).iter().cloned().fold(f64::NEG_INFINITY, f64::max)).collect();
        let targets: Vec<f64> = tuples.tuples.iter().map(|t| t.r + spec.gamma * vmax[t.s_next]).collect();
        let next = fit_least_squares(class, tuples, &targets, ridge)?.f;
        trace.push(trace_row(&[("iteration", (i + 1) as f64), ("sup_change", next.sup_dist(&f))]));
        f = next;
    }
    let pi = greedy(&f);
    let v: f64 = (0..spec.n_states)
        .map(|s| spec.init_dist[s] * f.row(s).iter().cloned().fold(f64::NEG_INFINITY, f64::max))
        .sum();
    let mut out = OptResult::new(pi.into(), Estimate::new(v));
    out.trace = trace;
    Ok(out)
}

/// How fitted policy iteration evaluates each iterate.
#[derive(Clone, Copy, Debug)]
pub enum EvalMode<'a> {
    Fqe { iterations: usize, ridge: f64 },
    /// Exact `Q^pi` from the true model: classic policy iteration.
    Exact(&'a TabularMdp),
}

/// Starting from the uniform policy, evaluate then act greedily, `K` times.
pub fn fpi(spec: &ProblemSpec, class: &FunctionClass, tuples: &TupleDataset, k: usize, eval: EvalMode<'_>) -> Result<OptResult> {
    if k == 0 {
        return Err(Error::InvalidParams("FPI needs K >= 1".into()));
    }
    let mut pi = StationaryPolicy::uniform(spec.n_states, spec.n_actions);
    let mut trace = Vec::with_capacity(k);
    let mut q = ValueFunction::zeros(spec.n_states, spec.n_actions);
    for i in 0..k {
        q = match eval {
            EvalMode::Fqe { iterations, ridge } => fqe(spec, class, tuples, &pi, iterations, ridge)?.iterates.pop().expect("K >= 1"),
            EvalMode::Exact(mdp) => solve_q(mdp, Target::Policy(&pi), 1e-12)?,
        };
        let mut row = trace_row(&[("iteration", (i + 1) as f64)]);
        if let EvalMode::Exact(mdp) = eval {
            row.insert("true_return".into(), policy_return(mdp, &pi, None));
        }
        trace.push(row);
        let next = greedy(&q);
        pi = next;
    }
    let est = crate::ope::plug_in_return(spec, &q, &pi);
    let mut out = OptResult::new(pi.into(), Estimate::new(est));
    out.trace = trace;
    Ok(out)
}
