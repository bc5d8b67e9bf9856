use super::brm::argmin;
use crate::data::TupleDataset;
use crate::error::{Error, Result};
use crate::mdp::{policy_return, ProblemSpec, StationaryPolicy, TabularMdp};

/// Where candidate transition models come from.
#[derive(Clone, Copy, Debug)]
pub enum ModelSource<'a> {
    /// Finite list sharing everything but the transition tensor.
    Candidates(&'a [TabularMdp]),
    /// Empirical counts. Unseen pairs get a uniform next state and reward 0;
    /// rewards are empirical means.
    Tabular,
}

#[derive(Clone, Debug)]
pub struct MleFit {
    pub model: TabularMdp,
    /// `-(1/n) sum log P(s'|s,a)` per candidate; infinite when a candidate
    /// gives a logged transition zero probability.
    pub log_losses: Vec<f64>,
    pub index: Option<usize>,
    /// `max_{s,a} |P - P_hat|_1` against the supplied truth.
    pub l1_error: Option<f64>,
    /// `E_{d_D}[|P - P_hat|_1^2]` against the supplied truth.
    pub l1_sq_error: Option<f64>,
}

fn log_loss(model: &TabularMdp, tuples: &TupleDataset) -> f64 {
    let n = tuples.len().max(1) as f64;
    let mut total = 0.0;
    for t in &tuples.tuples {
        let p = model.p(t.s, t.a, t.s_next);
        if p <= 0.0 {
            return f64::INFINITY;
        }
        total -= p.ln();
    }
    total / n
}

fn tabular_model(spec: &ProblemSpec, tuples: &TupleDataset) -> Result<TabularMdp> {
    let (ns, na) = (spec.n_states, spec.n_actions);
    let mut counts = vec![0.0; ns * na * ns];
    let mut visits = vec![0.0; ns * na];
    let mut rsum = vec![0.0; ns * na];
    for t in &tuples.tuples {
        let p = t.s * na + t.a;
        counts[p * ns + t.s_next] += 1.0;
        visits[p] += 1.0;
        rsum[p] += t.r;
    }
    let mut transition = vec![0.0; ns * na * ns];
    let mut reward = vec![0.0; ns * na];
    for p in 0..ns * na {
        if visits[p] > 0.0 {
            for s2 in 0..ns {
                transition[p * ns + s2] = counts[p * ns + s2] / visits[p];
            }
            reward[p] = (rsum[p] / visits[p]).clamp(0.0, spec.r_max);
        } else {
            transition[p * ns..(p + 1) * ns].iter_mut().for_each(|x| *x = 1.0 / ns as f64);
        }
    }
    TabularMdp::new(ns, na, transition, reward, spec.gamma, spec.init_dist.clone(), spec.r_max)
}

/// Maximum-likelihood transition model.
pub fn mle_model(spec: &ProblemSpec, source: ModelSource<'_>, tuples: &TupleDataset, truth: Option<&TabularMdp>) -> Result<MleFit> {
    let (model, log_losses, index) = match source {
        ModelSource::Candidates(cands) => {
            if cands.is_empty() {
                return Err(Error::InvalidParams("no candidate models".into()));
            }
            let losses: Vec<f64> = cands.iter().map(|m| log_loss(m, tuples)).collect();
            let best = argmin(&losses);
            if !losses[best].is_finite() {
                return Err(Error::InvalidParams("every candidate assigns zero likelihood to the data".into()));
            }
            (cands[best].clone(), losses, Some(best))
        }
        ModelSource::Tabular => {
            let m = tabular_model(spec, tuples)?;
            let l = log_loss(&m, tuples);
            (m, vec![l], None)
        }
    };
    let (l1_error, l1_sq_error) = match truth {
        Some(t) => {
            let row_l1: Vec<f64> = (0..t.n_pairs())
                .map(|p| t.next_dist(p).iter().zip(model.next_dist(p)).map(|(a, b)| (a - b).abs()).sum())
                .collect();
            let weights = match &tuples.data_dist {
                Some(d) => d.dist().to_vec(),
                None => tuples.empirical_dist(spec.n_states, spec.n_actions),
            };
            let sq = row_l1.iter().zip(&weights).map(|(e, w)| w * e * e).sum();
            (Some(row_l1.iter().cloned().fold(0.0, f64::max)), Some(sq))
        }
        None => (None, None),
    };
    Ok(MleFit { model, log_losses, index, l1_error, l1_sq_error })
}

/// Return of `pi` in a fitted model.
pub fn model_return(model: &TabularMdp, pi: &StationaryPolicy) -> f64 {
    policy_return(model, pi, None)
}
