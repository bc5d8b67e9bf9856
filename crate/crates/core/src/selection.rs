//! Value-function selection by pairwise discretized Bellman residuals.
//!
//! Each pair of candidates induces a joint grid partition of the
//! state-action pairs. Both candidates are snapped to their cell midpoints
//! and scored by how far they sit from the per-cell regression of their own
//! one-step backup. The tournament winner minimizes its worst pairwise score.

use serde::{Deserialize, Serialize};

use crate::data::TupleDataset;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::function_class::{aggregate_mdp, bvft_partition, grid_index, Partition};
use crate::mdp::{bellman_backup, state_values, StationaryPolicy, TabularMdp, Target, ValueFunction};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub winner_index: usize,
    /// `pairwise_losses[i][j]`: residual of candidate `i` when compared with `j`.
    pub pairwise_losses: Vec<Vec<f64>>,
    /// Cell count of the joint partition of each pair (symmetric).
    pub partitions_used: Vec<Vec<usize>>,
}

/// Outcome of one comparison; `chosen` is 0 for the first candidate.
#[derive(Clone, Debug, PartialEq)]
pub struct PairOutcome {
    pub chosen: usize,
    pub residuals: [f64; 2],
    pub n_cells: usize,
}

/// `(ceil(v_max / eps) + 1)^2`, the most cells a joint partition can have.
pub fn cell_bound(v_max: f64, eps: f64) -> usize {
    let per_axis = (v_max / eps).ceil() as usize + 1;
    per_axis * per_axis
}

/// Clip into `[0, v_max]`, warning when anything moved.
pub fn clip_candidate(f: &ValueFunction, v_max: f64) -> ValueFunction {
    let clipped = f.map(|v| v.clamp(0.0, v_max));
    if clipped != *f {
        log::warn!("candidate clipped into [0, {v_max}]");
    }
    clipped
}

/// Each value replaced by the midpoint of its grid cell.
pub fn discretize(f: &ValueFunction, eps: f64) -> ValueFunction {
    f.map(|v| (grid_index(v, eps) as f64 + 0.5) * eps)
}

/// `sqrt((1/n) sum_t (fbar(s,a) - mean_cell(r + gamma fbar(s', pi)))^2)`.
pub fn empirical_residual(fbar: &ValueFunction, partition: &Partition, tuples: &TupleDataset, pi: &StationaryPolicy, gamma: f64) -> f64 {
    if tuples.is_empty() {
        return 0.0;
    }
    let na = fbar.n_actions();
    let v = state_values(fbar, pi);
    let mut sums = vec![0.0; partition.n_cells()];
    let mut counts = vec![0usize; partition.n_cells()];
    for t in &tuples.tuples {
        let c = partition.cell_of(t.s * na + t.a);
        sums[c] += t.r + gamma * v[t.s_next];
        counts[c] += 1;
    }
    let sq: f64 = tuples
        .tuples
        .iter()
        .map(|t| {
            let p = t.s * na + t.a;
            let c = partition.cell_of(p);
            let e = fbar.values()[p] - sums[c] / counts[c] as f64;
            e * e
        })
        .sum();
    (sq / tuples.len() as f64).sqrt()
}

/// Population counterpart of [`empirical_residual`]: the backup is taken in
/// the aggregated MDP and the norm is weighted by `d_d`.
pub fn population_residual(mdp: &TabularMdp, fbar: &ValueFunction, partition: &Partition, pi: &StationaryPolicy, d_d: &[f64]) -> Result<f64> {
    let agg = aggregate_mdp(mdp, partition, d_d)?;
    let backup = bellman_backup(agg.mdp(), fbar, Target::Policy(pi))?;
    Ok(fbar.zip_with(&backup, |a, b| a - b).norm2_under(d_d))
}

fn prepare(f1: &ValueFunction, f2: &ValueFunction, eps: f64, v_max: f64) -> Result<(ValueFunction, ValueFunction, Partition)> {
    if !(eps > 0.0) || !(v_max > 0.0) {
        return Err(Error::InvalidParams("eps and v_max must be positive".into()));
    }
    if f1.values().iter().chain(f2.values()).any(|v| !v.is_finite()) {
        return Err(Error::InvalidParams("candidate values must be finite".into()));
    }
    let (c1, c2) = (clip_candidate(f1, v_max), clip_candidate(f2, v_max));
    let partition = bvft_partition(&c1, &c2, eps, v_max)?;
    Ok((discretize(&c1, eps), discretize(&c2, eps), partition))
}

/// Compare two candidates; ties go to `f1`.
pub fn bvft_pair(
    f1: &ValueFunction,
    f2: &ValueFunction,
    tuples: &TupleDataset,
    pi: &StationaryPolicy,
    gamma: f64,
    eps: f64,
    v_max: f64,
) -> Result<PairOutcome> {
    let (g1, g2, partition) = prepare(f1, f2, eps, v_max)?;
    let r1 = empirical_residual(&g1, &partition, tuples, pi, gamma);
    let r2 = empirical_residual(&g2, &partition, tuples, pi, gamma);
    Ok(PairOutcome { chosen: usize::from(r2 < r1), residuals: [r1, r2], n_cells: partition.n_cells() })
}

/// Population residuals of a pair, computed on the aggregated model.
pub fn bvft_pair_population(
    mdp: &TabularMdp,
    f1: &ValueFunction,
    f2: &ValueFunction,
    pi: &StationaryPolicy,
    d_d: &[f64],
    eps: f64,
) -> Result<[f64; 2]> {
    let (g1, g2, partition) = prepare(f1, f2, eps, mdp.v_max())?;
    Ok([population_residual(mdp, &g1, &partition, pi, d_d)?, population_residual(mdp, &g2, &partition, pi, d_d)?])
}

/// Round robin over all pairs. Winner: smallest worst-case residual, ties to
/// the lowest index.
#[allow(clippy::too_many_arguments)]
pub fn bvft_tournament(
    exec: Exec,
    candidates: &[ValueFunction],
    tuples: &TupleDataset,
    pi: &StationaryPolicy,
    gamma: f64,
    eps: f64,
    v_max: f64,
) -> Result<SelectionReport> {
    let m = candidates.len();
    if m < 2 {
        return Err(Error::InvalidParams("tournament needs at least two candidates".into()));
    }
    let pairs: Vec<(usize, usize)> = (0..m).flat_map(|i| (i + 1..m).map(move |j| (i, j))).collect();
    let outcomes = exec.map_indexed(pairs.len(), |k| {
        let (i, j) = pairs[k];
        bvft_pair(&candidates[i], &candidates[j], tuples, pi, gamma, eps, v_max)
    });
    let mut losses = vec![vec![0.0; m]; m];
    let mut cells = vec![vec![0usize; m]; m];
    for (&(i, j), out) in pairs.iter().zip(outcomes) {
        let out = out?;
        losses[i][j] = out.residuals[0];
        losses[j][i] = out.residuals[1];
        cells[i][j] = out.n_cells;
        cells[j][i] = out.n_cells;
    }
    let worst: Vec<f64> = (0..m)
        .map(|i| (0..m).filter(|&j| j != i).map(|j| losses[i][j]).fold(f64::NEG_INFINITY, f64::max))
        .collect();
    let mut winner = 0;
    for i in 1..m {
        if worst[i] < worst[winner] {
            winner = i;
        }
    }
    Ok(SelectionReport { winner_index: winner, pairwise_losses: losses, partitions_used: cells })
}
