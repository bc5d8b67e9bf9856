//! Off-policy evaluation estimators.

mod brm;
mod fqe;
mod is;
mod mis;
mod model;
mod version_space;

pub(crate) use brm::argmin as argmin_index;
pub use brm::{brm, lstdq, lstdq_population, population_td_loss, td_loss, BrmFit, LstdqFit};
pub use fqe::{fqe, fqe_population, FqeRun};
pub use is::{is_estimate, IsMode};
pub use mis::{mql, mql_population_loss, mwl, mwl_population_loss, MqlFit, MwlFit};
pub use model::{mle_model, model_return, MleFit, ModelSource};
pub use version_space::{corrected_losses, version_space, vs_interval, VersionSpace, VsConfig};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data::TupleDataset;
use crate::mdp::{ProblemSpec, StationaryPolicy, ValueFunction};

/// A point estimate with optional interval and named diagnostics.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub point: f64,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub diagnostics: BTreeMap<String, f64>,
}

impl Estimate {
    pub fn new(point: f64) -> Self {
        Estimate { point, ..Default::default() }
    }

    pub fn with(mut self, key: &str, value: f64) -> Self {
        self.diagnostics.insert(key.to_string(), value);
        self
    }

    pub fn diag(&self, key: &str) -> Option<f64> {
        self.diagnostics.get(key).copied()
    }
}

/// `f(s', pi)` for every tuple.
pub(crate) fn next_values(tuples: &TupleDataset, f: &ValueFunction, pi: &StationaryPolicy) -> Vec<f64> {
    let v = crate::mdp::state_values(f, pi);
    tuples.tuples.iter().map(|t| v[t.s_next]).collect()
}

/// `J_f(pi) = E_{s~d0}[f(s, pi)]`.
pub fn plug_in_return(spec: &ProblemSpec, f: &ValueFunction, pi: &StationaryPolicy) -> f64 {
    crate::mdp::state_values(f, pi).iter().zip(&spec.init_dist).map(|(v, w)| v * w).sum()
}

/// Empirical linear moments used by closed-form solvers.
pub(crate) fn brm_stats(spec: &ProblemSpec, phi: &crate::function_class::FeatureMap, tuples: &TupleDataset, pi: &StationaryPolicy) -> brm::LinearStats {
    brm::LinearStats::new(spec, phi, tuples, pi)
}
