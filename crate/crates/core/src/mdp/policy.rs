use serde::{Deserialize, Serialize};

use super::check_distribution;
use crate::error::{Error, Result};

/// Stationary stochastic policy, flat `s * A + a`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StationaryPolicy {
    n_states: usize,
    n_actions: usize,
    probs: Vec<f64>,
}

impl StationaryPolicy {
    pub fn new(n_states: usize, n_actions: usize, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != n_states * n_actions {
            return Err(Error::ShapeMismatch(format!("policy has {} entries", probs.len())));
        }
        for s in 0..n_states {
            check_distribution(&probs[s * n_actions..(s + 1) * n_actions], &format!("policy row {s}"))?;
        }
        Ok(StationaryPolicy { n_states, n_actions, probs })
    }

    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        let p = 1.0 / n_actions as f64;
        StationaryPolicy { n_states, n_actions, probs: vec![p; n_states * n_actions] }
    }

    /// Deterministic policy from one action per state.
    pub fn deterministic(n_actions: usize, actions: &[usize]) -> Result<Self> {
        let mut probs = vec![0.0; actions.len() * n_actions];
        for (s, &a) in actions.iter().enumerate() {
            if a >= n_actions {
                return Err(Error::ShapeMismatch(format!("action {a} out of range")));
            }
            probs[s * n_actions + a] = 1.0;
        }
        Ok(StationaryPolicy { n_states: actions.len(), n_actions, probs })
    }

    /// Same action in every state.
    pub fn constant(n_states: usize, n_actions: usize, a: usize) -> Result<Self> {
        Self::deterministic(n_actions, &vec![a; n_states])
    }

    /// Rows renormalized from nonnegative scores; used by softmax updates.
    pub(crate) fn from_unnormalized(n_states: usize, n_actions: usize, mut w: Vec<f64>) -> Self {
        for row in w.chunks_mut(n_actions) {
            let z: f64 = row.iter().sum();
            row.iter_mut().for_each(|x| *x /= z);
        }
        StationaryPolicy { n_states, n_actions, probs: w }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }
    pub fn n_actions(&self) -> usize {
        self.n_actions
    }
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }
    pub fn prob(&self, s: usize, a: usize) -> f64 {
        self.probs[s * self.n_actions + a]
    }
    pub fn row(&self, s: usize) -> &[f64] {
        &self.probs[s * self.n_actions..(s + 1) * self.n_actions]
    }

    /// All deterministic policies, in lexicographic order of action tuples.
    pub fn enumerate_deterministic(n_states: usize, n_actions: usize) -> Vec<StationaryPolicy> {
        let total = n_actions.pow(n_states as u32);
        (0..total)
            .map(|mut code| {
                let mut acts = vec![0; n_states];
                for s in (0..n_states).rev() {
                    acts[s] = code % n_actions;
                    code /= n_actions;
                }
                StationaryPolicy::deterministic(n_actions, &acts).expect("in range")
            })
            .collect()
    }
}

/// Time-indexed policy. `steps[k-1]` is the policy the fitted iterate `k`
/// was built for; execution runs the last entry first, so at time `t` the
/// agent follows `steps[K-1-t]`. Returns are truncated after `K` steps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NonstationaryPolicy {
    steps: Vec<StationaryPolicy>,
}

impl NonstationaryPolicy {
    pub fn new(steps: Vec<StationaryPolicy>) -> Result<Self> {
        let first = steps.first().ok_or_else(|| Error::InvalidParams("empty nonstationary policy".into()))?;
        if steps.iter().any(|p| p.n_states != first.n_states || p.n_actions != first.n_actions) {
            return Err(Error::ShapeMismatch("nonstationary steps disagree in shape".into()));
        }
        Ok(NonstationaryPolicy { steps })
    }

    pub fn steps(&self) -> &[StationaryPolicy] {
        &self.steps
    }

    pub fn horizon(&self) -> usize {
        self.steps.len()
    }

    /// Policy acting at time `t` (0-based), for `t < horizon`.
    pub fn at_time(&self, t: usize) -> &StationaryPolicy {
        &self.steps[self.steps.len() - 1 - t]
    }
}

/// Trajectory-level mixture: one component is drawn at the start of an
/// episode and followed throughout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixturePolicy {
    components: Vec<Policy>,
    weights: Vec<f64>,
}

impl MixturePolicy {
    pub fn new(components: Vec<Policy>, weights: Vec<f64>) -> Result<Self> {
        if components.is_empty() || components.len() != weights.len() {
            return Err(Error::InvalidParams("mixture needs one weight per component".into()));
        }
        check_distribution(&weights, "mixture weights")?;
        Ok(MixturePolicy { components, weights })
    }

    pub fn uniform(components: Vec<Policy>) -> Result<Self> {
        let w = vec![1.0 / components.len().max(1) as f64; components.len()];
        Self::new(components, w)
    }

    pub fn components(&self) -> &[Policy] {
        &self.components
    }
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Policy {
    Stationary(StationaryPolicy),
    Nonstationary(NonstationaryPolicy),
    Mixture(MixturePolicy),
}

impl From<StationaryPolicy> for Policy {
    fn from(p: StationaryPolicy) -> Self {
        Policy::Stationary(p)
    }
}

impl From<NonstationaryPolicy> for Policy {
    fn from(p: NonstationaryPolicy) -> Self {
        Policy::Nonstationary(p)
    }
}

impl From<MixturePolicy> for Policy {
    fn from(p: MixturePolicy) -> Self {
        Policy::Mixture(p)
    }
}

impl Policy {
    pub fn as_stationary(&self) -> Option<&StationaryPolicy> {
        match self {
            Policy::Stationary(p) => Some(p),
            _ => None,
        }
    }
}
