use super::Estimate;
use crate::data::TrajectoryDataset;
use crate::error::{Error, Result};
use crate::mdp::StationaryPolicy;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IsMode {
    Plain,
    /// Normalizes by the sum of cumulative weights.
    Weighted,
}

/// Trajectory-wise importance sampling of the discounted return.
pub fn is_estimate(
    td: &TrajectoryDataset,
    pi: &StationaryPolicy,
    pi_d: &StationaryPolicy,
    mode: IsMode,
    gamma: f64,
) -> Result<Estimate> {
    let n = td.trajectories.len();
    let mut weights = Vec::with_capacity(n);
    let mut returns = Vec::with_capacity(n);
    for traj in &td.trajectories {
        let mut w = 1.0;
        for t in &traj.steps {
            let b = pi_d.prob(t.s, t.a);
            if b <= 0.0 {
                return Err(Error::CoverageViolation { s: t.s, a: t.a });
            }
            w *= pi.prob(t.s, t.a) / b;
        }
        weights.push(w);
        returns.push(traj.discounted_return(gamma));
    }
    let nf = n.max(1) as f64;
    let terms: Vec<f64> = weights.iter().zip(&returns).map(|(w, g)| w * g).collect();
    let plain = terms.iter().sum::<f64>() / nf;
    let point = match mode {
        IsMode::Plain => plain,
        IsMode::Weighted => {
            let z: f64 = weights.iter().sum();
            if z > 0.0 {
                terms.iter().sum::<f64>() / z
            } else {
                0.0
            }
        }
    };
    let var = if n > 1 { terms.iter().map(|x| (x - plain).powi(2)).sum::<f64>() / (nf - 1.0) } else { 0.0 };
    let mean_w = weights.iter().sum::<f64>() / nf;
    let w_var = if n > 1 { weights.iter().map(|w| (w - mean_w).powi(2)).sum::<f64>() / (nf - 1.0) } else { 0.0 };
    Ok(Estimate::new(point)
        .with("n", nf)
        .with("max_weight", weights.iter().cloned().fold(0.0, f64::max))
        .with("mean_weight", mean_w)
        .with("weight_variance", w_var)
        .with("sample_variance", var))
}
