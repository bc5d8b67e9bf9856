//! Value-function classes and the operations that fit data onto them.

mod aggregate;
mod complete;
mod fit;
mod lowrank;

pub use aggregate::{aggregate_mdp, bvft_partition, grid_index, AggregatedMdp};
pub use complete::{check_completeness, CompletenessReport};
pub use fit::{fit_least_squares, project, Fit};
pub use lowrank::{gen_low_rank_mdp, LowRankMdp};
pub(crate) use lowrank::simplex_point;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::ValueFunction;

/// Feature vectors for every state-action pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureMap {
    n_states: usize,
    n_actions: usize,
    dim: usize,
    /// Flat `(s * A + a) * dim + k`.
    features: Vec<f64>,
    norm_bound: f64,
}

impl FeatureMap {
    pub fn new(n_states: usize, n_actions: usize, dim: usize, features: Vec<f64>, norm_bound: f64) -> Result<Self> {
        if dim == 0 || features.len() != n_states * n_actions * dim {
            return Err(Error::ShapeMismatch(format!(
                "feature tensor has {} entries, expected {}",
                features.len(),
                n_states * n_actions * dim
            )));
        }
        let fm = FeatureMap { n_states, n_actions, dim, features, norm_bound };
        for p in 0..n_states * n_actions {
            let norm = fm.phi(p).iter().map(|x| x * x).sum::<f64>().sqrt();
            if !(norm <= norm_bound * (1.0 + 1e-12)) {
                return Err(Error::InvalidParams(format!("feature norm {norm} at pair {p} exceeds bound {norm_bound}")));
            }
        }
        Ok(fm)
    }

    /// Bound taken as the largest feature norm.
    pub fn from_features(n_states: usize, n_actions: usize, dim: usize, features: Vec<f64>) -> Result<Self> {
        let bound = features
            .chunks(dim.max(1))
            .map(|c| c.iter().map(|x| x * x).sum::<f64>().sqrt())
            .fold(0.0, f64::max);
        Self::new(n_states, n_actions, dim, features, bound)
    }

    /// One-hot indicator per pair.
    pub fn tabular(n_states: usize, n_actions: usize) -> Self {
        let n = n_states * n_actions;
        let mut features = vec![0.0; n * n];
        for p in 0..n {
            features[p * n + p] = 1.0;
        }
        FeatureMap { n_states, n_actions, dim: n, features, norm_bound: 1.0 }
    }

    /// One-hot indicator per partition cell.
    pub fn from_partition(partition: &Partition) -> Self {
        let n = partition.cell_of.len();
        let d = partition.n_cells;
        let mut features = vec![0.0; n * d];
        for (p, &c) in partition.cell_of.iter().enumerate() {
            features[p * d + c] = 1.0;
        }
        FeatureMap { n_states: partition.n_states, n_actions: partition.n_actions, dim: d, features, norm_bound: 1.0 }
    }

    pub fn scaled(&self, c: f64) -> FeatureMap {
        FeatureMap {
            features: self.features.iter().map(|x| x * c).collect(),
            norm_bound: self.norm_bound * c.abs(),
            ..self.clone()
        }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }
    pub fn n_actions(&self) -> usize {
        self.n_actions
    }
    pub fn n_pairs(&self) -> usize {
        self.n_states * self.n_actions
    }
    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn norm_bound(&self) -> f64 {
        self.norm_bound
    }

    pub fn phi(&self, p: usize) -> &[f64] {
        &self.features[p * self.dim..(p + 1) * self.dim]
    }

    pub fn phi_sa(&self, s: usize, a: usize) -> &[f64] {
        self.phi(s * self.n_actions + a)
    }

    pub fn phi_vec(&self, p: usize) -> DVector<f64> {
        DVector::from_column_slice(self.phi(p))
    }

    /// Design matrix with one row per pair.
    pub fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n_pairs(), self.dim, &self.features)
    }

    /// `f(s,a) = phi(s,a)^T theta`.
    pub fn eval(&self, theta: &[f64]) -> ValueFunction {
        let values = (0..self.n_pairs())
            .map(|p| self.phi(p).iter().zip(theta).map(|(x, t)| x * t).sum())
            .collect();
        ValueFunction::raw(self.n_states, self.n_actions, values)
    }

    /// `E_{s~d0}[phi(s, pi)]`.
    pub fn initial_mean(&self, init_dist: &[f64], pi: &crate::mdp::StationaryPolicy) -> DVector<f64> {
        let mut m = DVector::zeros(self.dim);
        for s in 0..self.n_states {
            for a in 0..self.n_actions {
                let w = init_dist[s] * pi.prob(s, a);
                if w != 0.0 {
                    m += self.phi_vec(s * self.n_actions + a) * w;
                }
            }
        }
        m
    }

    /// `E_w[phi phi^T]` for a weighting over pairs.
    pub fn gram(&self, w: &[f64]) -> DMatrix<f64> {
        let mut g = DMatrix::zeros(self.dim, self.dim);
        for (p, &wp) in w.iter().enumerate() {
            if wp != 0.0 {
                let v = self.phi_vec(p);
                g += &v * v.transpose() * wp;
            }
        }
        crate::linalg::symmetrize(&g)
    }

    /// `E_w[phi]`.
    pub fn mean(&self, w: &[f64]) -> DVector<f64> {
        let mut m = DVector::zeros(self.dim);
        for (p, &wp) in w.iter().enumerate() {
            if wp != 0.0 {
                m += self.phi_vec(p) * wp;
            }
        }
        m
    }
}

/// Disjoint cover of the state-action pairs.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    n_states: usize,
    n_actions: usize,
    cell_of: Vec<usize>,
    n_cells: usize,
}

impl Partition {
    pub fn new(n_states: usize, n_actions: usize, cell_of: Vec<usize>) -> Result<Self> {
        if cell_of.len() != n_states * n_actions {
            return Err(Error::ShapeMismatch("partition must map every pair".into()));
        }
        let n_cells = cell_of.iter().max().map_or(0, |m| m + 1);
        let mut seen = vec![false; n_cells];
        cell_of.iter().for_each(|&c| seen[c] = true);
        if seen.iter().any(|x| !x) {
            return Err(Error::InvalidParams("cell indices must be contiguous from 0".into()));
        }
        Ok(Partition { n_states, n_actions, cell_of, n_cells })
    }

    /// Every pair in its own cell.
    pub fn identity(n_states: usize, n_actions: usize) -> Self {
        let n = n_states * n_actions;
        Partition { n_states, n_actions, cell_of: (0..n).collect(), n_cells: n }
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }
    pub fn cell_of(&self, p: usize) -> usize {
        self.cell_of[p]
    }
    pub fn cells(&self) -> &[usize] {
        &self.cell_of
    }
    pub fn n_states(&self) -> usize {
        self.n_states
    }
    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    /// Members of each cell.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut m = vec![Vec::new(); self.n_cells];
        for (p, &c) in self.cell_of.iter().enumerate() {
            m[c].push(p);
        }
        m
    }

    /// True when every cell of `self` sits inside one cell of `coarser`.
    pub fn refines(&self, coarser: &Partition) -> bool {
        let mut image = vec![None; self.n_cells];
        for (p, &c) in self.cell_of.iter().enumerate() {
            match image[c] {
                None => image[c] = Some(coarser.cell_of[p]),
                Some(k) if k != coarser.cell_of[p] => return false,
                _ => {}
            }
        }
        true
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FunctionClass {
    /// Explicit enumeration.
    Finite { members: Vec<ValueFunction> },
    /// `{ phi^T theta : |theta| <= coef_bound }`; use infinity for no bound.
    Linear { features: FeatureMap, coef_bound: f64 },
    /// Functions constant on each cell.
    PiecewiseConstant { partition: Partition },
}

impl FunctionClass {
    pub fn finite(members: Vec<ValueFunction>) -> Result<Self> {
        let first = members.first().ok_or_else(|| Error::InvalidParams("finite class is empty".into()))?;
        if members.iter().any(|m| !m.same_shape(first)) {
            return Err(Error::ShapeMismatch("finite class members differ in shape".into()));
        }
        Ok(FunctionClass::Finite { members })
    }

    pub fn linear(features: FeatureMap) -> Self {
        FunctionClass::Linear { features, coef_bound: f64::INFINITY }
    }

    /// All functions on the pairs.
    pub fn tabular(n_states: usize, n_actions: usize) -> Self {
        FunctionClass::PiecewiseConstant { partition: Partition::identity(n_states, n_actions) }
    }

    pub fn shape(&self) -> (usize, usize) {
        match self {
            FunctionClass::Finite { members } => (members[0].n_states(), members[0].n_actions()),
            FunctionClass::Linear { features, .. } => (features.n_states, features.n_actions),
            FunctionClass::PiecewiseConstant { partition } => (partition.n_states, partition.n_actions),
        }
    }

    pub fn members(&self) -> Option<&[ValueFunction]> {
        match self {
            FunctionClass::Finite { members } => Some(members),
            _ => None,
        }
    }

    /// Linear view of linear and piecewise-constant classes.
    pub fn as_linear(&self) -> Option<FeatureMap> {
        match self {
            FunctionClass::Linear { features, .. } => Some(features.clone()),
            FunctionClass::PiecewiseConstant { partition } => Some(FeatureMap::from_partition(partition)),
            FunctionClass::Finite { .. } => None,
        }
    }
}
