use super::pessimism::{f_min_oracle, FminResult};
use super::{trace_row, OptResult};
use crate::data::TupleDataset;
use crate::error::{Error, Result};
use crate::function_class::FunctionClass;
use crate::mdp::{occupancy, state_values, MixturePolicy, Policy, ProblemSpec, StationaryPolicy, TabularMdp, ValueFunction};
use crate::ope::{corrected_losses, Estimate, VsConfig};

#[derive(Clone, Debug)]
pub struct PspiConfig {
    pub k: usize,
    /// Step size; `None` uses [`default_eta`].
    pub eta: Option<f64>,
    pub vs: VsConfig,
    pub lambda_grid: Vec<f64>,
}

impl PspiConfig {
    pub fn new(k: usize) -> Self {
        PspiConfig { k, eta: None, vs: VsConfig::default(), lambda_grid: super::default_lambda_grid() }
    }
}

/// `eta = (1 - gamma) / v_max * sqrt(ln|A| / (2K))`.
pub fn default_eta(spec: &ProblemSpec, k: usize) -> f64 {
    (1.0 - spec.gamma) / spec.v_max() * ((spec.n_actions as f64).ln() / (2.0 * k as f64)).sqrt()
}

#[derive(Clone, Debug)]
pub struct PspiRun {
    pub result: OptResult,
    /// `pi_1 .. pi_K`.
    pub policies: Vec<StationaryPolicy>,
    /// `f_1 .. f_K`, each the pessimistic member for its policy.
    pub fs: Vec<ValueFunction>,
    pub eta: f64,
}

impl PspiRun {
    /// Softmax policy after `k` updates, rebuilt from the stored iterates.
    pub fn policy_at(&self, k: usize) -> StationaryPolicy {
        softmax_policy(&self.fs[..k], self.eta, self.policies[0].n_states(), self.policies[0].n_actions())
    }
}

fn softmax_policy(fs: &[ValueFunction], eta: f64, ns: usize, na: usize) -> StationaryPolicy {
    let mut w = Vec::with_capacity(ns * na);
    for s in 0..ns {
        let logits: Vec<f64> = (0..na).map(|a| eta * fs.iter().map(|f| f.get(s, a)).sum::<f64>()).collect();
        let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        w.extend(logits.iter().map(|l| (l - m).exp()));
    }
    StationaryPolicy::from_unnormalized(ns, na, w)
}

/// Version-space threshold for `pi`. Finite classes add the usual slack to
/// the minimum loss; linear classes use `c v_max^2 (dim ln n + ln(1/delta)) / n`
/// above the zero minimum of the closed form.
fn eps0_for(spec: &ProblemSpec, class: &FunctionClass, tuples: &TupleDataset, pi: &StationaryPolicy, cfg: &VsConfig) -> f64 {
    let n = tuples.len().max(1);
    match class {
        FunctionClass::Finite { members } => {
            let losses = corrected_losses(spec, members, tuples, pi);
            let min = losses.iter().cloned().fold(f64::INFINITY, f64::min);
            min + cfg.slack(spec, members.len(), n)
        }
        other => {
            let dim = other.as_linear().expect("linear view").dim() as f64;
            cfg.c * spec.v_max().powi(2) * (dim * (n as f64).ln() + (1.0 / cfg.delta).ln()) / n as f64
        }
    }
}

/// Pessimistic soft policy iteration. `pi_1` is uniform; each round takes
/// the most pessimistic version-space member `f_k` for `pi_k` and applies
/// `pi_{k+1} ∝ pi_k exp(eta f_k)`. Returns the uniform trajectory-level
/// mixture of `pi_1 .. pi_K`.
pub fn pspi(spec: &ProblemSpec, class: &FunctionClass, tuples: &TupleDataset, cfg: &PspiConfig) -> Result<PspiRun> {
    if cfg.k == 0 {
        return Err(Error::InvalidParams("PSPI needs K >= 1".into()));
    }
    let eta = cfg.eta.unwrap_or_else(|| default_eta(spec, cfg.k));
    if !(eta > 0.0) {
        return Err(Error::InvalidParams("eta must be positive".into()));
    }
    let (ns, na) = (spec.n_states, spec.n_actions);
    let mut policies = Vec::with_capacity(cfg.k);
    let mut fs: Vec<ValueFunction> = Vec::with_capacity(cfg.k);
    let mut trace = Vec::with_capacity(cfg.k);
    let mut pi = StationaryPolicy::uniform(ns, na);
    for i in 0..cfg.k {
        let eps0 = eps0_for(spec, class, tuples, &pi, &cfg.vs);
        let FminResult { f, j, e_hat, feasible, .. } = f_min_oracle(spec, class, tuples, &pi, eps0, &cfg.lambda_grid)?;
        trace.push(trace_row(&[
            ("iteration", (i + 1) as f64),
            ("j_min", j),
            ("e_hat", e_hat),
            ("eps0", eps0),
            ("feasible", if feasible { 1.0 } else { 0.0 }),
        ]));
        policies.push(pi);
        fs.push(f);
        pi = softmax_policy(&fs, eta, ns, na);
    }
    let mean_lower = trace.iter().map(|r| r["j_min"]).sum::<f64>() / cfg.k as f64;
    let mixture = MixturePolicy::uniform(policies.iter().cloned().map(Policy::from).collect())?;
    let mut result = OptResult::new(mixture.into(), Estimate::new(mean_lower).with("eta", eta));
    result.trace = trace;
    Ok(PspiRun { result, policies, fs, eta })
}

/// `(1/K) sum_k E_{s ~ d^{pi_cp}}[f_k(s, pi_cp) - f_k(s, pi_k)]` with the
/// exact state occupancy of the comparator.
pub fn pspi_regret_term(mdp: &TabularMdp, run: &PspiRun, comparator: &StationaryPolicy) -> Result<f64> {
    let d = occupancy(mdp, comparator, None)?.state_marginal();
    let k = run.fs.len() as f64;
    let total: f64 = run
        .fs
        .iter()
        .zip(&run.policies)
        .map(|(f, pk)| {
            let a = state_values(f, comparator);
            let b = state_values(f, pk);
            d.iter().zip(a.iter().zip(&b)).map(|(w, (x, y))| w * (x - y)).sum::<f64>()
        })
        .sum();
    Ok(total / k)
}
