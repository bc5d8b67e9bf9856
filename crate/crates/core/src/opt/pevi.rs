use nalgebra::{DMatrix, DVector};

use super::{trace_row, OptResult};
use crate::data::TupleDataset;
use crate::error::{Error, Result};
use crate::function_class::FeatureMap;
use crate::linalg;
use crate::mdp::{greedy, NonstationaryPolicy, ProblemSpec, ValueFunction};
use crate::ope::Estimate;

#[derive(Clone, Debug)]
pub struct PeviConfig {
    pub k: usize,
    /// Bonus scale; `None` uses [`default_beta`] with `beta_c` and `delta`.
    pub beta: Option<f64>,
    pub beta_c: f64,
    pub delta: f64,
    /// Multiplier of the identity added to `sum phi phi^T`.
    pub ridge: f64,
}

impl PeviConfig {
    pub fn new(k: usize) -> Self {
        PeviConfig { k, beta: None, beta_c: 1.0, delta: 0.05, ridge: 1.0 }
    }
}

/// `beta = c v_max sqrt(dim ln(n dim / delta))`.
pub fn default_beta(spec: &ProblemSpec, dim: usize, n: usize, c: f64, delta: f64) -> f64 {
    let dim_f = dim as f64;
    c * spec.v_max() * (dim_f * ((n.max(1) as f64) * dim_f / delta).ln().max(1.0)).sqrt()
}

#[derive(Clone, Debug)]
pub struct PeviRun {
    pub result: OptResult,
    /// Pessimistic iterates `f_1^- .. f_K^-`.
    pub f_minus: Vec<ValueFunction>,
    /// Bonus functions `b_1 .. b_K` (identical across k since data is shared).
    pub bonuses: Vec<ValueFunction>,
    pub policy: NonstationaryPolicy,
    pub beta: f64,
}

/// Pessimistic value iteration with linear features. Each round fits
/// `r + gamma max_a' f_{k-1}^-(s', a')` by ridge regression, subtracts the
/// elliptical bonus `(beta / sqrt n) sqrt(phi^T (S^ridge)^{-1} phi)` with
/// `S^ridge = (sum phi phi^T + ridge I) / n`, and clips to `[-v_max, v_max]`.
/// The output runs `greedy(f_K^-)` first and `greedy(f_1^-)` last.
pub fn pevi(spec: &ProblemSpec, phi: &FeatureMap, tuples: &TupleDataset, cfg: &PeviConfig) -> Result<PeviRun> {
    if cfg.k == 0 {
        return Err(Error::InvalidParams("PEVI needs K >= 1".into()));
    }
    if !(cfg.ridge > 0.0) {
        return Err(Error::InvalidParams("PEVI ridge must be positive".into()));
    }
    let n = tuples.len();
    let d = phi.dim();
    let beta = cfg.beta.unwrap_or_else(|| default_beta(spec, d, n, cfg.beta_c, cfg.delta));
    let mut lambda = DMatrix::identity(d, d) * cfg.ridge;
    for t in &tuples.tuples {
        let x = phi.phi_vec(t.s * spec.n_actions + t.a);
        lambda += &x * x.transpose();
    }
    let lambda_inv = linalg::inverse(&linalg::symmetrize(&lambda))?;
    // (beta / sqrt n) sqrt(phi^T (Lambda / n)^{-1} phi) = beta sqrt(phi^T Lambda^{-1} phi).
    let bonus_values: Vec<f64> = (0..phi.n_pairs())
        .map(|p| {
            let x = phi.phi_vec(p);
            beta * (x.dot(&(&lambda_inv * &x))).max(0.0).sqrt()
        })
        .collect();
    let bonus = ValueFunction::raw(spec.n_states, spec.n_actions, bonus_values);
    let v_max = spec.v_max();

    let mut f = ValueFunction::zeros(spec.n_states, spec.n_actions);
    let mut f_minus = Vec::with_capacity(cfg.k);
    let mut steps = Vec::with_capacity(cfg.k);
    let mut trace = Vec::with_capacity(cfg.k);
    for i in 0..cfg.k {
        let vmax: Vec<f64> = (0..spec.n_states).map(|s| f.row(s).iter().cloned().fold(f64::NEG_INFINITY, f64::max)).collect();
        let mut rhs = DVector::zeros(d);
        for t in &tuples.tuples {
            let y = t.r + spec.gamma * vmax[t.s_next];
            rhs += phi.phi_vec(t.s * spec.n_actions + t.a) * y;
        }
        let theta = &lambda_inv * rhs;
        let fitted = phi.eval(theta.as_slice());
        f = fitted.zip_with(&bonus, |v, b| (v - b).clamp(-v_max, v_max));
        trace.push(trace_row(&[("iteration", (i + 1) as f64), ("sup_norm", f.sup_norm())]));
        steps.push(greedy(&f));
        f_minus.push(f.clone());
    }
    let policy = NonstationaryPolicy::new(steps)?;
    let v: f64 = (0..spec.n_states)
        .map(|s| spec.init_dist[s] * f.row(s).iter().cloned().fold(f64::NEG_INFINITY, f64::max))
        .sum();
    let mut result = OptResult::new(policy.clone().into(), Estimate::new(v).with("beta", beta));
    result.trace = trace;
    Ok(PeviRun { result, bonuses: vec![bonus; cfg.k], f_minus, policy, beta })
}
