use super::{next_values, plug_in_return, Estimate};
use crate::data::TupleDataset;
use crate::error::Result;
use crate::function_class::{fit_least_squares, project, FunctionClass};
use crate::mdp::{bellman_backup, ProblemSpec, StationaryPolicy, TabularMdp, Target, ValueFunction};

#[derive(Clone, Debug)]
pub struct FqeRun {
    /// `f_1 .. f_K`.
    pub iterates: Vec<ValueFunction>,
    /// `|f_k - f_{k-1}|_inf` for each iteration.
    pub changes: Vec<f64>,
    pub estimate: Estimate,
}

/// Fitted Q evaluation from `f_0 = 0`: each step regresses
/// `r + gamma f_{k-1}(s', pi)` onto the class.
pub fn fqe(spec: &ProblemSpec, class: &FunctionClass, tuples: &TupleDataset, pi: &StationaryPolicy, k: usize, ridge: f64) -> Result<FqeRun> {
    if k == 0 {
        return Err(crate::Error::InvalidParams("FQE needs K >= 1".into()));
    }
    let mut f = ValueFunction::zeros(spec.n_states, spec.n_actions);
    let mut iterates = Vec::with_capacity(k);
    let mut changes = Vec::with_capacity(k);
    for _ in 0..k {
        let next = next_values(tuples, &f, pi);
        let targets: Vec<f64> = tuples.tuples.iter().zip(next).map(|(t, v)| t.r + spec.gamma * v).collect();
        let fit = fit_least_squares(class, tuples, &targets, ridge)?;
        changes.push(fit.f.sup_dist(&f));
        f = fit.f;
        iterates.push(f.clone());
    }
    let estimate = Estimate::new(plug_in_return(spec, &f, pi))
        .with("iterations", k as f64)
        .with("sup_change_last", *changes.last().expect("K >= 1"))
        .with("sup_change_max", changes.iter().cloned().fold(0.0, f64::max))
        .with("sup_norm_final", f.sup_norm());
    Ok(FqeRun { iterates, changes, estimate })
}

/// Population FQE: `f_k = Proj_w T^pi f_{k-1}` with exact expectations,
/// starting from `f0`. Returns `f_1 .. f_K`.
pub fn fqe_population(
    mdp: &TabularMdp,
    class: &FunctionClass,
    pi: &StationaryPolicy,
    weighting: &[f64],
    k: usize,
    f0: &ValueFunction,
) -> Result<Vec<ValueFunction>> {
    let mut f = f0.clone();
    let mut out = Vec::with_capacity(k);
    for _ in 0..k {
        let tf = bellman_backup(mdp, &f, Target::Policy(pi))?;
        f = project(class, &tf, weighting)?.f;
        out.push(f.clone());
    }
    Ok(out)
}
