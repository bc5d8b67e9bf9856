use super::{trace_row, OptResult};
use crate::data::TupleDataset;
use crate::error::{Error, Result};
use crate::mdp::{policy_return, ProblemSpec, StationaryPolicy, TabularMdp};
use crate::ope::{mle_model, Estimate, ModelSource};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelPessConfig {
    pub delta: f64,
    /// Threshold: `loss <= mle_loss + c ln(|P| / delta) / n`.
    pub c: f64,
}

impl Default for ModelPessConfig {
    fn default() -> Self {
        ModelPessConfig { delta: 0.05, c: 1.0 }
    }
}

#[derive(Clone, Copy, Debug)]
pub enum PessMode<'a> {
    /// `max_pi min_P J_P(pi)`.
    Absolute,
    /// `max_pi min_P (J_P(pi) - J_P(pi_ref))`.
    Relative(&'a StationaryPolicy),
}

#[derive(Clone, Debug)]
pub struct ModelVersionSpace {
    pub log_losses: Vec<f64>,
    pub threshold: f64,
    pub mle_index: usize,
    pub flags: Vec<bool>,
}

#[derive(Clone, Debug)]
pub struct ModelPessRun {
    pub result: OptResult,
    pub version_space: ModelVersionSpace,
    /// Worst-case objective of each policy.
    pub objectives: Vec<f64>,
    pub chosen: usize,
}

/// Exact double enumeration over candidate models and policies.
pub fn model_pessimism(
    spec: &ProblemSpec,
    candidates: &[TabularMdp],
    policies: &[StationaryPolicy],
    tuples: &TupleDataset,
    cfg: ModelPessConfig,
    mode: PessMode<'_>,
) -> Result<ModelPessRun> {
    if policies.is_empty() {
        return Err(Error::InvalidParams("empty policy class".into()));
    }
    let fit = mle_model(spec, ModelSource::Candidates(candidates), tuples, None)?;
    let mle_index = fit.index.expect("candidate mode");
    let threshold = fit.log_losses[mle_index] + cfg.c * (candidates.len() as f64 / cfg.delta).ln() / tuples.len().max(1) as f64;
    let flags: Vec<bool> = fit.log_losses.iter().enumerate().map(|(i, &l)| i == mle_index || l <= threshold).collect();
    let returns: Vec<Vec<f64>> = candidates
        .iter()
        .map(|m| policies.iter().map(|p| policy_return(m, p, None)).collect())
        .collect();
    let refs: Vec<f64> = match mode {
        PessMode::Absolute => vec![0.0; candidates.len()],
        PessMode::Relative(r) => candidates.iter().map(|m| policy_return(m, r, None)).collect(),
    };
    let objectives: Vec<f64> = (0..policies.len())
        .map(|j| {
            (0..candidates.len())
                .filter(|&m| flags[m])
                .map(|m| returns[m][j] - refs[m])
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    let mut chosen = 0;
    for (j, &o) in objectives.iter().enumerate() {
        if o > objectives[chosen] {
            chosen = j;
        }
    }
    let mut result = OptResult::new(policies[chosen].clone().into(), Estimate::new(objectives[chosen]));
    result.trace = objectives.iter().enumerate().map(|(j, &o)| trace_row(&[("policy", j as f64), ("objective", o)])).collect();
    Ok(ModelPessRun {
        result,
        version_space: ModelVersionSpace { log_losses: fit.log_losses, threshold, mle_index, flags },
        objectives,
        chosen,
    })
}
