use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Real function over state-action pairs, flat `s * A + a`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValueFunction {
    n_states: usize,
    n_actions: usize,
    values: Vec<f64>,
}

/// Density-ratio style weights share the value-function representation.
pub type WeightFunction = ValueFunction;

impl ValueFunction {
    pub fn new(n_states: usize, n_actions: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n_states * n_actions {
            return Err(Error::ShapeMismatch(format!(
                "value function has {} entries, expected {}",
                values.len(),
                n_states * n_actions
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParams("value function has non-finite entries".into()));
        }
        Ok(ValueFunction { n_states, n_actions, values })
    }

    pub fn zeros(n_states: usize, n_actions: usize) -> Self {
        ValueFunction { n_states, n_actions, values: vec![0.0; n_states * n_actions] }
    }

    pub fn constant(n_states: usize, n_actions: usize, c: f64) -> Self {
        ValueFunction { n_states, n_actions, values: vec![c; n_states * n_actions] }
    }

    /// Unchecked constructor for internal arithmetic.
    pub(crate) fn raw(n_states: usize, n_actions: usize, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), n_states * n_actions);
        ValueFunction { n_states, n_actions, values }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }
    pub fn n_actions(&self) -> usize {
        self.n_actions
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.values[s * self.n_actions + a]
    }
    pub fn row(&self, s: usize) -> &[f64] {
        &self.values[s * self.n_actions..(s + 1) * self.n_actions]
    }

    pub fn same_shape(&self, other: &ValueFunction) -> bool {
        self.n_states == other.n_states && self.n_actions == other.n_actions
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ValueFunction {
        ValueFunction::raw(self.n_states, self.n_actions, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_with(&self, other: &ValueFunction, f: impl Fn(f64, f64) -> f64) -> ValueFunction {
        assert!(self.same_shape(other), "value function shapes differ");
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        ValueFunction::raw(self.n_states, self.n_actions, values)
    }

    pub fn add_scalar(&self, c: f64) -> ValueFunction {
        self.map(|v| v + c)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn sup_dist(&self, other: &ValueFunction) -> f64 {
        self.values.iter().zip(&other.values).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// `E_w[f]` for a weighting over pairs.
    pub fn mean_under(&self, w: &[f64]) -> f64 {
        self.values.iter().zip(w).map(|(v, p)| v * p).sum()
    }

    /// Weighted 2-norm `sqrt(E_w[f^2])`.
    pub fn norm2_under(&self, w: &[f64]) -> f64 {
        self.values.iter().zip(w).map(|(v, p)| v * v * p).sum::<f64>().sqrt()
    }
}

/// Normalized discounted state-action occupancy, optionally with the
/// per-step distributions it was assembled from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OccupancyMeasure {
    n_states: usize,
    n_actions: usize,
    dist: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    per_step: Option<Vec<Vec<f64>>>,
}

impl OccupancyMeasure {
    pub fn new(n_states: usize, n_actions: usize, dist: Vec<f64>) -> Result<Self> {
        if dist.len() != n_states * n_actions {
            return Err(Error::ShapeMismatch(format!("occupancy has {} entries", dist.len())));
        }
        if dist.iter().any(|&x| !(x >= 0.0)) {
            return Err(Error::InvalidParams("occupancy has negative entries".into()));
        }
        let z: f64 = dist.iter().sum();
        if (z - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidParams(format!("occupancy sums to {z}")));
        }
        Ok(OccupancyMeasure { n_states, n_actions, dist, per_step: None })
    }

    /// Uniform over all pairs.
    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        let n = n_states * n_actions;
        OccupancyMeasure { n_states, n_actions, dist: vec![1.0 / n as f64; n], per_step: None }
    }

    /// Point mass on one pair.
    pub fn point_mass(n_states: usize, n_actions: usize, s: usize, a: usize) -> Self {
        let mut dist = vec![0.0; n_states * n_actions];
        dist[s * n_actions + a] = 1.0;
        OccupancyMeasure { n_states, n_actions, dist, per_step: None }
    }

    pub(crate) fn raw(n_states: usize, n_actions: usize, dist: Vec<f64>, per_step: Option<Vec<Vec<f64>>>) -> Self {
        OccupancyMeasure { n_states, n_actions, dist, per_step }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }
    pub fn n_actions(&self) -> usize {
        self.n_actions
    }
    pub fn dist(&self) -> &[f64] {
        &self.dist
    }
    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.dist[s * self.n_actions + a]
    }
    pub fn per_step(&self) -> Option<&[Vec<f64>]> {
        self.per_step.as_deref()
    }

    /// State marginal.
    pub fn state_marginal(&self) -> Vec<f64> {
        self.dist.chunks(self.n_actions).map(|c| c.iter().sum()).collect()
    }

    /// Mixture `sum_i w_i * d_i` of measures on the same space.
    pub fn mixture(parts: &[&OccupancyMeasure], weights: &[f64]) -> Result<Self> {
        let first = parts.first().ok_or_else(|| Error::InvalidParams("empty mixture".into()))?;
        let mut dist = vec![0.0; first.dist.len()];
        for (d, &w) in parts.iter().zip(weights) {
            if d.dist.len() != dist.len() {
                return Err(Error::ShapeMismatch("mixture parts differ in shape".into()));
            }
            for (x, y) in dist.iter_mut().zip(&d.dist) {
                *x += w * y;
            }
        }
        OccupancyMeasure::new(first.n_states, first.n_actions, dist)
    }
}
