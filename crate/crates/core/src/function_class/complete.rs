use nalgebra::{DMatrix, DVector};

use super::FunctionClass;
use crate::error::{Error, Result};
use crate::mdp::{bellman_backup, policy_matrix, solve_q, Target, TabularMdp, ValueFunction};

#[derive(Clone, Debug)]
pub struct CompletenessReport {
    /// Worst approximation gap `max_f min_g |g - T f|_inf`.
    pub gap: f64,
    /// Per-member gaps for finite `F`; per generator for linear `F`
    /// (reward first, then `gamma P_pi phi_k`).
    pub member_gaps: Vec<f64>,
    /// `min_{g in G} |g - Q|_inf` for the operator's fixed point.
    pub realizability_gap: f64,
    pub complete: bool,
}

/// Either an explicit list or a span.
enum Approx {
    List(Vec<ValueFunction>),
    Span(DMatrix<f64>),
}

impl Approx {
    fn from_class(g: &FunctionClass) -> Self {
        match g {
            FunctionClass::Finite { members } => Approx::List(members.clone()),
            other => Approx::Span(other.as_linear().expect("linear view").matrix()),
        }
    }

    /// Sup-norm distance to the list, or sup-norm residual of the
    /// least-squares projection onto the span.
    fn gap(&self, v: &[f64]) -> f64 {
        match self {
            Approx::List(members) => members
                .iter()
                .map(|m| m.values().iter().zip(v).fold(0.0_f64, |acc, (a, b)| acc.max((a - b).abs())))
                .fold(f64::INFINITY, f64::min),
            Approx::Span(phi) => {
                let y = DVector::from_column_slice(v);
                let svd = phi.clone().svd(true, true);
                let coef = svd.solve(&y, 1e-12).unwrap_or_else(|_| DVector::zeros(phi.ncols()));
                (phi * coef - y).amax()
            }
        }
    }
}

/// How far `G` is from containing `T f` for every `f` in `F`.
///
/// Finite `F` is enumerated. For linear `F = {Phi theta}` the backup is
/// affine in `theta`, `T^pi f = R + gamma P_pi Phi theta`, so `F` is complete
/// exactly when `R` and every column of `gamma P_pi Phi` lie in the span of
/// `G`; those generators' residuals are reported. Linear `F` with the
/// optimality operator is not supported.
pub fn check_completeness(
    class_f: &FunctionClass,
    class_g: &FunctionClass,
    mdp: &TabularMdp,
    target: Target<'_>,
    tol: f64,
) -> Result<CompletenessReport> {
    let approx = Approx::from_class(class_g);
    let q = solve_q(mdp, target, 1e-12)?;
    let realizability_gap = approx.gap(q.values());
    let member_gaps: Vec<f64> = match class_f {
        FunctionClass::Finite { members } => members
            .iter()
            .map(|f| bellman_backup(mdp, f, target).map(|tf| approx.gap(tf.values())))
            .collect::<Result<_>>()?,
        other => {
            let pi = match target {
                Target::Policy(pi) => pi,
                Target::Optimality => {
                    return Err(Error::Unsupported("completeness of a linear class under the optimality operator".into()))
                }
            };
            let phi = other.as_linear().expect("linear view").matrix();
            let next = policy_matrix(mdp, pi) * &phi * mdp.gamma();
            let mut gaps = vec![approx.gap(mdp.reward())];
            for k in 0..next.ncols() {
                let col: Vec<f64> = next.column(k).iter().cloned().collect();
                gaps.push(approx.gap(&col));
            }
            gaps
        }
    };
    let gap = member_gaps.iter().cloned().fold(0.0, f64::max);
    Ok(CompletenessReport { gap, member_gaps, realizability_gap, complete: gap <= tol })
}
