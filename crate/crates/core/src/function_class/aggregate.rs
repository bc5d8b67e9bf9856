use std::collections::HashMap;

use super::Partition;
use crate::error::{Error, Result};
use crate::mdp::{TabularMdp, ValueFunction};

/// Values this far outside `[0, v_max]` still count as in range.
const RANGE_SLACK: f64 = 1e-12;

/// Grid cell `floor(v / eps)` of a value in `[0, v_max]`.
pub fn grid_index(v: f64, eps: f64) -> usize {
    (v.max(0.0) / eps).floor() as usize
}

/// Joint discretization of two candidates: pairs share a cell iff both
/// grid indices match. Cells are numbered in order of first appearance.
pub fn bvft_partition(f1: &ValueFunction, f2: &ValueFunction, eps: f64, v_max: f64) -> Result<Partition> {
    if !(eps > 0.0) {
        return Err(Error::InvalidParams("eps must be positive".into()));
    }
    if !f1.same_shape(f2) {
        return Err(Error::ShapeMismatch("candidates differ in shape".into()));
    }
    for &v in f1.values().iter().chain(f2.values()) {
        if !(v >= -RANGE_SLACK && v <= v_max + RANGE_SLACK) {
            return Err(Error::OutOfRange { value: v, v_max });
        }
    }
    let mut ids: HashMap<(usize, usize), usize> = HashMap::new();
    let cell_of = f1
        .values()
        .iter()
        .zip(f2.values())
        .map(|(&a, &b)| {
            let key = (grid_index(a, eps), grid_index(b, eps));
            let next = ids.len();
            *ids.entry(key).or_insert(next)
        })
        .collect();
    Partition::new(f1.n_states(), f1.n_actions(), cell_of)
}

/// Aggregated model living on the original pairs: each pair sees the
/// within-cell mixture of its cell's transitions and rewards.
#[derive(Clone, Debug)]
pub struct AggregatedMdp {
    pub partition: Partition,
    /// Within-cell distribution at each pair.
    pub weights: Vec<f64>,
    mdp: TabularMdp,
}

impl AggregatedMdp {
    /// The aggregated model as an ordinary MDP on the same pairs.
    pub fn mdp(&self) -> &TabularMdp {
        &self.mdp
    }
}

/// Within-cell weights are `d_D` renormalized per cell; cells with no
/// `d_D` mass use uniform weights.
pub fn aggregate_mdp(mdp: &TabularMdp, partition: &Partition, d_d: &[f64]) -> Result<AggregatedMdp> {
    let (ns, na) = (mdp.n_states(), mdp.n_actions());
    if partition.n_states() != ns || partition.n_actions() != na || d_d.len() != ns * na {
        return Err(Error::ShapeMismatch("partition or weighting does not match the MDP".into()));
    }
    let members = partition.members();
    let mut weights = vec![0.0; ns * na];
    for cell in &members {
        let mass: f64 = cell.iter().map(|&p| d_d[p]).sum();
        for &p in cell {
            weights[p] = if mass > 0.0 { d_d[p] / mass } else { 1.0 / cell.len() as f64 };
        }
    }
    let mut cell_p = vec![vec![0.0; ns]; members.len()];
    let mut cell_r = vec![0.0; members.len()];
    for (c, cell) in members.iter().enumerate() {
        for &p in cell {
            let w = weights[p];
            for (x, y) in cell_p[c].iter_mut().zip(mdp.next_dist(p)) {
                *x += w * y;
            }
            cell_r[c] += w * mdp.reward()[p];
        }
        let z: f64 = cell_p[c].iter().sum();
        cell_p[c].iter_mut().for_each(|x| *x /= z);
    }
    let mut transition = Vec::with_capacity(ns * na * ns);
    let mut reward = Vec::with_capacity(ns * na);
    for p in 0..ns * na {
        let c = partition.cell_of(p);
        transition.extend_from_slice(&cell_p[c]);
        reward.push(cell_r[c].clamp(0.0, mdp.r_max()));
    }
    let agg = TabularMdp::new(ns, na, transition, reward, mdp.gamma(), mdp.init_dist().to_vec(), mdp.r_max())?;
    Ok(AggregatedMdp { partition: partition.clone(), weights, mdp: agg })
}
