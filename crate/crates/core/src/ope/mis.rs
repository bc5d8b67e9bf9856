//! Marginalized importance sampling: MQL learns a value function with
//! weights as discriminators, MWL learns weights with value functions as
//! discriminators.

use super::brm::{argmin, LinearStats};
use super::{next_values, plug_in_return, Estimate};
use crate::data::TupleDataset;
use crate::error::{Error, Result};
use crate::function_class::FunctionClass;
use crate::linalg;
use crate::mdp::{bellman_backup, expected_next_value, ProblemSpec, StationaryPolicy, TabularMdp, Target, ValueFunction, WeightFunction};

#[derive(Clone, Debug)]
pub struct MqlFit {
    pub f: ValueFunction,
    pub estimate: Estimate,
    /// `max_w L_q(w, f_hat)` on the data.
    pub loss: f64,
}

#[derive(Clone, Debug)]
pub struct MwlFit {
    pub w: WeightFunction,
    pub estimate: Estimate,
    /// `max_f L_w(w_hat, f)` on the data.
    pub loss: f64,
}

fn lq_hat(spec: &ProblemSpec, tuples: &TupleDataset, w: &WeightFunction, f: &ValueFunction, next: &[f64]) -> f64 {
    let n = tuples.len().max(1) as f64;
    let s: f64 = tuples
        .tuples
        .iter()
        .zip(next)
        .map(|(t, v)| w.get(t.s, t.a) * (f.get(t.s, t.a) - t.r - spec.gamma * v))
        .sum();
    (s / n).abs() / (1.0 - spec.gamma)
}

fn lw_hat(spec: &ProblemSpec, tuples: &TupleDataset, w: &WeightFunction, f: &ValueFunction, pi: &StationaryPolicy, next: &[f64]) -> f64 {
    let n = tuples.len().max(1) as f64;
    let s: f64 = tuples
        .tuples
        .iter()
        .zip(next)
        .map(|(t, v)| w.get(t.s, t.a) * (spec.gamma * v - f.get(t.s, t.a)))
        .sum();
    (plug_in_return(spec, f, pi) + s / n / (1.0 - spec.gamma)).abs()
}

/// `argmin_f max_w |E_D[w (f - r - gamma f(s', pi))]| / (1 - gamma)`.
///
/// Finite classes are enumerated. Linear `F` with linear `W` on the same
/// features (pass `None`) reduces to LSTDQ.
pub fn mql(
    spec: &ProblemSpec,
    class_f: &FunctionClass,
    class_w: Option<&FunctionClass>,
    tuples: &TupleDataset,
    pi: &StationaryPolicy,
) -> Result<MqlFit> {
    match (class_f, class_w) {
        (FunctionClass::Finite { members: fs }, Some(FunctionClass::Finite { members: ws })) => {
            let losses: Vec<f64> = fs
                .iter()
                .map(|f| {
                    let next = next_values(tuples, f, pi);
                    ws.iter().map(|w| lq_hat(spec, tuples, w, f, &next)).fold(0.0, f64::max)
                })
                .collect();
            let best = argmin(&losses);
            let f = fs[best].clone();
            let estimate = Estimate::new(plug_in_return(spec, &f, pi)).with("loss", losses[best]).with("index", best as f64);
            Ok(MqlFit { f, estimate, loss: losses[best] })
        }
        (FunctionClass::Finite { .. }, _) => Err(Error::Unsupported("finite F needs a finite W".into())),
        (linear, None) => {
            let phi = linear.as_linear().expect("linear view");
            let fit = super::lstdq(spec, &phi, tuples, pi, 0.0)?;
            Ok(MqlFit { f: fit.f, estimate: fit.estimate.with("loss", 0.0), loss: 0.0 })
        }
        _ => Err(Error::Unsupported("linear F needs W = F".into())),
    }
}

/// `argmin_w max_f |E_{d0}[f(s, pi)] + E_D[w (gamma f(s', pi) - f)] / (1 - gamma)|`,
/// with estimate `E_D[w r] / (1 - gamma)`.
///
/// Linear classes on shared features (pass `None`) have the closed form
/// `alpha = (1 - gamma) A^{-T} E_{d0}[phi(s, pi)]`.
pub fn mwl(
    spec: &ProblemSpec,
    class_w: &FunctionClass,
    class_f: Option<&FunctionClass>,
    tuples: &TupleDataset,
    pi: &StationaryPolicy,
) -> Result<MwlFit> {
    let n = tuples.len().max(1) as f64;
    let value_of = |w: &WeightFunction| tuples.tuples.iter().map(|t| w.get(t.s, t.a) * t.r).sum::<f64>() / n / (1.0 - spec.gamma);
    match (class_w, class_f) {
        (FunctionClass::Finite { members: ws }, Some(FunctionClass::Finite { members: fs })) => {
            let nexts: Vec<Vec<f64>> = fs.iter().map(|f| next_values(tuples, f, pi)).collect();
            let losses: Vec<f64> = ws
                .iter()
                .map(|w| fs.iter().zip(&nexts).map(|(f, nx)| lw_hat(spec, tuples, w, f, pi, nx)).fold(0.0, f64::max))
                .collect();
            let best = argmin(&losses);
            let w = ws[best].clone();
            let estimate = Estimate::new(value_of(&w)).with("loss", losses[best]).with("index", best as f64);
            Ok(MwlFit { w, estimate, loss: losses[best] })
        }
        (FunctionClass::Finite { .. }, _) => Err(Error::Unsupported("finite W needs a finite F".into())),
        (linear, None) => {
            let phi = linear.as_linear().expect("linear view");
            let stats = LinearStats::new(spec, &phi, tuples, pi);
            let a = stats.a(spec.gamma);
            let smin = linalg::sigma_min(&a);
            if smin < 1e-10 {
                return Err(Error::IllConditioned(smin));
            }
            let alpha = linalg::solve_transpose(&a, &stats.nu0)? * (1.0 - spec.gamma);
            let w = phi.eval(alpha.as_slice());
            let estimate = Estimate::new(value_of(&w)).with("loss", 0.0).with("sigma_min_a", smin);
            Ok(MwlFit { w, estimate, loss: 0.0 })
        }
        _ => Err(Error::Unsupported("linear W needs F = W".into())),
    }
}

/// Exact `|E_{d_D}[w (f - T^pi f)]| / (1 - gamma)`.
pub fn mql_population_loss(mdp: &TabularMdp, d_d: &[f64], w: &WeightFunction, f: &ValueFunction, pi: &StationaryPolicy) -> f64 {
    let tf = bellman_backup(mdp, f, Target::Policy(pi)).expect("shapes match");
    let s: f64 = (0..d_d.len()).map(|p| d_d[p] * w.values()[p] * (f.values()[p] - tf.values()[p])).sum();
    s.abs() / (1.0 - mdp.gamma())
}

/// Exact `|E_{d0}[f(s, pi)] + E_{d_D}[w (gamma E f(s', pi) - f)] / (1 - gamma)|`.
pub fn mwl_population_loss(mdp: &TabularMdp, d_d: &[f64], w: &WeightFunction, f: &ValueFunction, pi: &StationaryPolicy) -> f64 {
    let next = expected_next_value(mdp, f, pi);
    let start = plug_in_return(&mdp.spec(), f, pi);
    let s: f64 = (0..d_d.len())
        .map(|p| d_d[p] * w.values()[p] * (mdp.gamma() * next[p] - f.values()[p]))
        .sum();
    (start + s / (1.0 - mdp.gamma())).abs()
}
