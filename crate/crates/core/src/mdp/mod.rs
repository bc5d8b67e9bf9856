//! Finite MDPs and exact dynamic-programming oracles.

mod dp;
mod model;
mod policy;
mod value;

pub use dp::{
    bellman_backup, expected_next_value, finite_horizon_values, greedy, occupancy, policy_matrix,
    policy_return, solve_q, state_values, PolicyRef, Target,
};
pub use model::{ProblemSpec, RewardOutcome, TabularMdp};
pub use policy::{MixturePolicy, NonstationaryPolicy, Policy, StationaryPolicy};
pub use value::{OccupancyMeasure, ValueFunction, WeightFunction};

pub(crate) const PROB_TOL: f64 = 1e-12;

pub(crate) fn check_distribution(p: &[f64], what: &str) -> crate::Result<()> {
    if p.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
        return Err(crate::Error::InvalidModel(format!("{what} has a negative or non-finite entry")));
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > PROB_TOL {
        return Err(crate::Error::InvalidModel(format!("{what} sums to {sum}, not 1")));
    }
    Ok(())
}
