//! Offline datasets: logged trajectories and transition tuples.

mod io;
mod sample;

pub use io::{load_trajectories, load_tuples, read_trajectories, read_tuples, save_trajectories, save_tuples, write_trajectories, write_tuples};
pub use sample::{
    cell_rng, sample_trajectories, sample_trajectories_with, sample_tuples, sample_tuples_with,
    tuples_from_trajectories,
};

use serde::{Deserialize, Serialize};

use crate::mdp::{OccupancyMeasure, StationaryPolicy};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub s: usize,
    pub a: usize,
    pub r: f64,
    pub s_next: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub steps: Vec<Transition>,
}

impl Trajectory {
    pub fn discounted_return(&self, gamma: f64) -> f64 {
        let mut g = 0.0;
        let mut w = 1.0;
        for t in &self.steps {
            g += w * t.r;
            w *= gamma;
        }
        g
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryDataset {
    pub trajectories: Vec<Trajectory>,
    pub behavior: StationaryPolicy,
    pub horizon: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TupleDataset {
    pub tuples: Vec<Transition>,
    /// True sampling distribution when the data is synthetic.
    pub data_dist: Option<OccupancyMeasure>,
    pub seed: u64,
}

impl TupleDataset {
    pub fn new(tuples: Vec<Transition>) -> Self {
        TupleDataset { tuples, data_dist: None, seed: 0 }
    }

    pub fn len(&self) -> usize {
        self.tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }

    /// Empirical pair frequencies, flat `s * A + a`.
    pub fn empirical_dist(&self, n_states: usize, n_actions: usize) -> Vec<f64> {
        let mut d = vec![0.0; n_states * n_actions];
        let w = 1.0 / self.tuples.len().max(1) as f64;
        for t in &self.tuples {
            d[t.s * n_actions + t.a] += w;
        }
        d
    }

    /// Per-pair visit counts.
    pub fn counts(&self, n_states: usize, n_actions: usize) -> Vec<usize> {
        let mut c = vec![0; n_states * n_actions];
        for t in &self.tuples {
            c[t.s * n_actions + t.a] += 1;
        }
        c
    }
}
