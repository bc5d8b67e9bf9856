use rand::Rng;

use super::FeatureMap;
use crate::data::cell_rng;
use crate::error::{Error, Result};
use crate::mdp::TabularMdp;

/// A generated MDP with `P(s'|s,a) = <phi(s,a), psi(s')>` and
/// `R(s,a) = <phi(s,a), theta_r>`.
#[derive(Clone, Debug)]
pub struct LowRankMdp {
    pub mdp: TabularMdp,
    pub features: FeatureMap,
    /// `psi[k]` is a distribution over next states.
    pub psi: Vec<Vec<f64>>,
    pub theta_r: Vec<f64>,
}

pub(crate) fn simplex_point<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    // Flat Dirichlet through normalized exponentials.
    let mut v: Vec<f64> = (0..n).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
    let z: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= z);
    v
}

/// Random rank-`d` MDP. Each `phi(s,a)` lies on the simplex and each
/// `psi_k` is a distribution, so rows of `P` are distributions. Rewards are
/// in `[0, 1]`. The initial distribution is the average of the `psi_k`, which
/// keeps every occupancy inside their span.
pub fn gen_low_rank_mdp(d: usize, n_states: usize, n_actions: usize, gamma: f64, seed: u64) -> Result<LowRankMdp> {
    if d == 0 || d > n_states * n_actions || d > n_states {
        return Err(Error::InvalidParams(format!("rank {d} must be in 1..=min(|S||A|, |S|)")));
    }
    let mut rng = cell_rng(seed, 0);
    let n = n_states * n_actions;
    let phi: Vec<Vec<f64>> = (0..n).map(|_| simplex_point(&mut rng, d)).collect();
    let psi: Vec<Vec<f64>> = (0..d).map(|_| simplex_point(&mut rng, n_states)).collect();
    let theta_r: Vec<f64> = (0..d).map(|_| rng.gen::<f64>()).collect();

    let mut transition = Vec::with_capacity(n * n_states);
    let mut reward = Vec::with_capacity(n);
    for f in &phi {
        for s2 in 0..n_states {
            transition.push((0..d).map(|k| f[k] * psi[k][s2]).sum::<f64>());
        }
        reward.push(f.iter().zip(&theta_r).map(|(a, b)| a * b).sum::<f64>().clamp(0.0, 1.0));
    }
    let init: Vec<f64> = (0..n_states).map(|s| psi.iter().map(|p| p[s]).sum::<f64>() / d as f64).collect();
    let mdp = TabularMdp::new(n_states, n_actions, transition, reward, gamma, init, 1.0)?;
    let features = FeatureMap::from_features(n_states, n_actions, d, phi.concat())?;
    Ok(LowRankMdp { mdp, features, psi, theta_r })
}
