//! Policy optimization: greedy fitted methods and pessimistic learners.

mod fitted;
mod model_pess;
mod pessimism;
mod pevi;
mod pspi;

pub use fitted::{fpi, fqi, EvalMode};
pub use model_pess::{model_pessimism, ModelPessConfig, ModelPessRun, ModelVersionSpace, PessMode};
pub use pessimism::{default_lambda_grid, f_min_oracle, pessimistic_search, FminResult};
pub use pevi::{default_beta, pevi, PeviConfig, PeviRun};
pub use pspi::{default_eta, pspi, pspi_regret_term, PspiConfig, PspiRun};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{greedy, policy_return, Policy, StationaryPolicy, TabularMdp, ValueFunction};
use crate::ope::Estimate;

/// Candidate policies for search-based optimizers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PolicyClass {
    Explicit { policies: Vec<StationaryPolicy> },
    /// Greedy policies of the members of a finite value class.
    InducedGreedy { members: Vec<ValueFunction> },
}

impl PolicyClass {
    pub fn policies(&self) -> Result<Vec<StationaryPolicy>> {
        let out: Vec<StationaryPolicy> = match self {
            PolicyClass::Explicit { policies } => policies.clone(),
            PolicyClass::InducedGreedy { members } => {
                let mut out: Vec<StationaryPolicy> = Vec::new();
                for f in members {
                    let g = greedy(f);
                    if !out.contains(&g) {
                        out.push(g);
                    }
                }
                out
            }
        };
        if out.is_empty() {
            return Err(Error::InvalidParams("empty policy class".into()));
        }
        Ok(out)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OptResult {
    pub policy: Policy,
    pub value_estimate: Estimate,
    /// `J(pi_cp) - J(pi_hat)` once an oracle is attached.
    pub truth_gap: Option<f64>,
    pub trace: Vec<BTreeMap<String, f64>>,
}

impl OptResult {
    pub fn new(policy: Policy, value_estimate: Estimate) -> Self {
        OptResult { policy, value_estimate, truth_gap: None, trace: Vec::new() }
    }

    /// Fill `truth_gap` against a comparator using the exact oracle.
    pub fn attach_oracle(&mut self, mdp: &TabularMdp, comparator: &Policy) -> f64 {
        let gap = policy_return(mdp, comparator, None) - policy_return(mdp, &self.policy, None);
        self.truth_gap = Some(gap);
        gap
    }
}

pub(crate) fn trace_row(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}
