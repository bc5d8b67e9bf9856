use std::collections::HashMap;

use super::{plug_in_return, Estimate};
use crate::data::TupleDataset;
use crate::error::{Error, Result};
use crate::function_class::FunctionClass;
use crate::mdp::{ProblemSpec, StationaryPolicy, ValueFunction};

/// Statistical threshold settings: `eps0 = min_loss + c v_max^2 ln(|F| n_policies / delta) / n`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VsConfig {
    pub delta: f64,
    pub c: f64,
    /// Size of the policy class the threshold is union-bounded over.
    pub n_policies: usize,
}

impl Default for VsConfig {
    fn default() -> Self {
        VsConfig { delta: 0.05, c: 2.0, n_policies: 1 }
    }
}

impl VsConfig {
    pub fn slack(&self, spec: &ProblemSpec, class_size: usize, n: usize) -> f64 {
        let log_term = ((class_size * self.n_policies.max(1)) as f64 / self.delta).ln();
        self.c * spec.v_max().powi(2) * log_term / n.max(1) as f64
    }
}

#[derive(Clone, Debug)]
pub struct VersionSpace {
    pub members: Vec<ValueFunction>,
    /// Corrected loss of each member with `G = F`.
    pub losses: Vec<f64>,
    pub flags: Vec<bool>,
    pub threshold: f64,
    /// Index of the loss minimizer, always included.
    pub min_index: usize,
    pub policy: StationaryPolicy,
}

impl VersionSpace {
    pub fn included(&self) -> impl Iterator<Item = (usize, &ValueFunction)> {
        self.members.iter().enumerate().filter(|(i, _)| self.flags[*i])
    }

    pub fn size(&self) -> usize {
        self.flags.iter().filter(|&&b| b).count()
    }
}

/// `L(f; f) - min_{g in F} L(g; f)` for every member.
///
/// The squared target is common to every `g` and cancels, so the data enter
/// only through per-pair and per-`(pair, s')` counts; after one pass over
/// the tuples each member costs `O(|S|^2 |A| + |F| |S||A|)`, less when
/// members share their regression targets.
pub fn corrected_losses(spec: &ProblemSpec, members: &[ValueFunction], tuples: &TupleDataset, pi: &StationaryPolicy) -> Vec<f64> {
    let (ns, np) = (spec.n_states, spec.n_pairs());
    let n = tuples.len().max(1) as f64;
    let g = spec.gamma;
    let mut counts = vec![0.0; np];
    let mut r_sum = vec![0.0; np];
    let mut next_count = vec![0.0; np * ns];
    for t in &tuples.tuples {
        let p = t.s * spec.n_actions + t.a;
        counts[p] += 1.0;
        r_sum[p] += t.r;
        next_count[p * ns + t.s_next] += 1.0;
    }
    let flat: Vec<f64> = members.iter().flat_map(|m| m.values().iter().copied()).collect();
    let sq: Vec<f64> = flat.chunks_exact(np).map(|row| row.iter().zip(&counts).map(|(v, c)| c * v * v).sum()).collect();
    let mut sums = vec![0.0; np];
    let mut best_by_sums: HashMap<Vec<u64>, f64> = HashMap::new();
    members
        .iter()
        .enumerate()
        .map(|(fi, f)| {
            let v = crate::mdp::state_values(f, pi);
            for (p, out) in sums.iter_mut().enumerate() {
                let row = &next_count[p * ns..(p + 1) * ns];
                *out = r_sum[p] + g * row.iter().zip(&v).map(|(c, x)| c * x).sum::<f64>();
            }
            let own = sq[fi] - 2.0 * f.values().iter().zip(&sums).map(|(a, b)| a * b).sum::<f64>();
            // The minimum over `g` depends on `f` only through `sums`, which
            // members often share (always when gamma = 0).
            let key: Vec<u64> = sums.iter().map(|x| x.to_bits()).collect();
            let best = *best_by_sums.entry(key).or_insert_with(|| {
                flat.chunks_exact(np)
                    .zip(&sq)
                    .map(|(row, q)| q - 2.0 * row.iter().zip(&sums).map(|(a, b)| a * b).sum::<f64>())
                    .fold(f64::INFINITY, f64::min)
            });
            ((own - best) / n).max(0.0)
        })
        .collect()
}

/// Members whose corrected loss is within the statistical threshold of the
/// minimum.
pub fn version_space(spec: &ProblemSpec, class: &FunctionClass, tuples: &TupleDataset, pi: &StationaryPolicy, cfg: VsConfig) -> Result<VersionSpace> {
    let members = class
        .members()
        .ok_or_else(|| Error::Unsupported("version spaces need a finite class".into()))?
        .to_vec();
    let losses = corrected_losses(spec, &members, tuples, pi);
    let min_index = super::brm::argmin(&losses);
    let threshold = losses[min_index] + cfg.slack(spec, members.len(), tuples.len());
    let flags = losses.iter().enumerate().map(|(i, &l)| i == min_index || l <= threshold).collect();
    Ok(VersionSpace { members, losses, flags, threshold, min_index, policy: pi.clone() })
}

/// Lower and upper ends are the min and max of `J_f(pi)` over the version
/// space; the point is the loss minimizer's `J_f(pi)`.
pub fn vs_interval(vs: &VersionSpace, spec: &ProblemSpec) -> Estimate {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (_, f) in vs.included() {
        let j = plug_in_return(spec, f, &vs.policy);
        lo = lo.min(j);
        hi = hi.max(j);
    }
    let point = plug_in_return(spec, &vs.members[vs.min_index], &vs.policy);
    let mut e = Estimate::new(point).with("threshold", vs.threshold).with("size", vs.size() as f64);
    e.lower = Some(lo);
    e.upper = Some(hi);
    e
}
