use serde::{Deserialize, Serialize};

use super::check_distribution;
use crate::error::{Error, Result};

/// One outcome of a discrete stochastic reward.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RewardOutcome {
    pub value: f64,
    pub prob: f64,
}

/// The parts of an MDP an offline learner is allowed to know: sizes,
/// discount, initial distribution and the reward bound.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub n_states: usize,
    pub n_actions: usize,
    pub gamma: f64,
    pub init_dist: Vec<f64>,
    pub r_max: f64,
}

impl ProblemSpec {
    pub fn n_pairs(&self) -> usize {
        self.n_states * self.n_actions
    }

    pub fn v_max(&self) -> f64 {
        self.r_max / (1.0 - self.gamma)
    }
}

/// Finite MDP with mean rewards and an optional discrete reward law per pair.
#[derive(Clone, Debug, PartialEq)]
pub struct TabularMdp {
    n_states: usize,
    n_actions: usize,
    /// Flat `(s * A + a) * S + s'`.
    transition: Vec<f64>,
    reward: Vec<f64>,
    reward_noise: Option<Vec<Vec<RewardOutcome>>>,
    gamma: f64,
    init_dist: Vec<f64>,
    r_max: f64,
}

impl TabularMdp {
    pub fn new(
        n_states: usize,
        n_actions: usize,
        transition: Vec<f64>,
        reward: Vec<f64>,
        gamma: f64,
        init_dist: Vec<f64>,
        r_max: f64,
    ) -> Result<Self> {
        let mdp = TabularMdp {
            n_states,
            n_actions,
            transition,
            reward,
            reward_noise: None,
            gamma,
            init_dist,
            r_max,
        };
        mdp.validate()?;
        Ok(mdp)
    }

    pub fn with_reward_noise(mut self, noise: Vec<Vec<RewardOutcome>>) -> Result<Self> {
        self.reward_noise = Some(noise);
        self.validate()?;
        Ok(self)
    }

    /// Same model with a different transition tensor.
    pub fn with_transition(&self, transition: Vec<f64>) -> Result<Self> {
        let mut m = self.clone();
        m.transition = transition;
        m.validate()?;
        Ok(m)
    }

    /// Same model with different mean rewards (drops any reward law).
    pub fn with_reward(&self, reward: Vec<f64>) -> Result<Self> {
        let mut m = self.clone();
        m.reward = reward;
        m.reward_noise = None;
        m.validate()?;
        Ok(m)
    }

    pub fn with_gamma(&self, gamma: f64) -> Result<Self> {
        let mut m = self.clone();
        m.gamma = gamma;
        m.validate()?;
        Ok(m)
    }

    pub fn with_init_dist(&self, init_dist: Vec<f64>) -> Result<Self> {
        let mut m = self.clone();
        m.init_dist = init_dist;
        m.validate()?;
        Ok(m)
    }

    fn validate(&self) -> Result<()> {
        let (s, a) = (self.n_states, self.n_actions);
        if s == 0 || a == 0 {
            return Err(Error::InvalidModel("empty state or action space".into()));
        }
        if self.transition.len() != s * a * s {
            return Err(Error::ShapeMismatch(format!(
                "transition has {} entries, expected {}",
                self.transition.len(),
                s * a * s
            )));
        }
        if self.reward.len() != s * a {
            return Err(Error::ShapeMismatch(format!("reward has {} entries, expected {}", self.reward.len(), s * a)));
        }
        if self.init_dist.len() != s {
            return Err(Error::ShapeMismatch(format!("init_dist has {} entries, expected {s}", self.init_dist.len())));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::InvalidModel(format!("gamma {} not in [0, 1)", self.gamma)));
        }
        if !(self.r_max.is_finite() && self.r_max > 0.0) {
            return Err(Error::InvalidModel(format!("r_max {} must be positive and finite", self.r_max)));
        }
        for p in 0..s * a {
            check_distribution(self.next_dist(p), &format!("transition row {p}"))?;
        }
        check_distribution(&self.init_dist, "init_dist")?;
        for (p, &r) in self.reward.iter().enumerate() {
            if !(r >= 0.0 && r <= self.r_max) {
                return Err(Error::InvalidModel(format!("reward {r} at pair {p} outside [0, r_max]")));
            }
        }
        if let Some(noise) = &self.reward_noise {
            if noise.len() != s * a {
                return Err(Error::ShapeMismatch("reward_noise length".into()));
            }
            for (p, law) in noise.iter().enumerate() {
                let probs: Vec<f64> = law.iter().map(|o| o.prob).collect();
                check_distribution(&probs, &format!("reward law at pair {p}"))?;
                if law.iter().any(|o| !(o.value >= 0.0 && o.value <= self.r_max)) {
                    return Err(Error::InvalidModel(format!("reward law at pair {p} leaves [0, r_max]")));
                }
                let mean: f64 = law.iter().map(|o| o.value * o.prob).sum();
                if (mean - self.reward[p]).abs() > 1e-12 {
                    return Err(Error::InvalidModel(format!("reward law mean {mean} at pair {p} != mean reward")));
                }
            }
        }
        Ok(())
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
    pub fn gamma(&self) -> f64 {
        self.gamma
    }
    pub fn r_max(&self) -> f64 {
        self.r_max
    }
    pub fn v_max(&self) -> f64 {
        self.r_max / (1.0 - self.gamma)
    }
    pub fn init_dist(&self) -> &[f64] {
        &self.init_dist
    }
    pub fn reward(&self) -> &[f64] {
        &self.reward
    }
    pub fn reward_noise(&self) -> Option<&[Vec<RewardOutcome>]> {
        self.reward_noise.as_deref()
    }
    pub fn transition(&self) -> &[f64] {
        &self.transition
    }

    pub fn pair(&self, s: usize, a: usize) -> usize {
        s * self.n_actions + a
    }

    /// Next-state distribution of pair index `p`.
    pub fn next_dist(&self, p: usize) -> &[f64] {
        &self.transition[p * self.n_states..(p + 1) * self.n_states]
    }

    pub fn p(&self, s: usize, a: usize, s_next: usize) -> f64 {
        self.transition[self.pair(s, a) * self.n_states + s_next]
    }

    pub fn spec(&self) -> ProblemSpec {
        ProblemSpec {
            n_states: self.n_states,
            n_actions: self.n_actions,
            gamma: self.gamma,
            init_dist: self.init_dist.clone(),
            r_max: self.r_max,
        }
    }

    /// States that loop to themselves with zero reward under every action.
    pub fn absorbing_states(&self) -> Vec<bool> {
        (0..self.n_states)
            .map(|s| {
                (0..self.n_actions).all(|a| {
                    let p = self.pair(s, a);
                    self.reward[p] == 0.0 && self.next_dist(p)[s] == 1.0
                })
            })
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&MdpDoc::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: MdpDoc = serde_json::from_str(text)?;
        doc.try_into()
    }
}

/// Nested-array document form used for persistence.
#[derive(Serialize, Deserialize)]
struct MdpDoc {
    n_states: usize,
    n_actions: usize,
    transition: Vec<Vec<Vec<f64>>>,
    reward: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    reward_noise: Option<Vec<Vec<Vec<RewardOutcome>>>>,
    gamma: f64,
    init_dist: Vec<f64>,
    r_max: f64,
}

impl From<&TabularMdp> for MdpDoc {
    fn from(m: &TabularMdp) -> Self {
        let (s, a) = (m.n_states, m.n_actions);
        MdpDoc {
            n_states: s,
            n_actions: a,
            transition: (0..s)
                .map(|i| (0..a).map(|j| m.next_dist(m.pair(i, j)).to_vec()).collect())
                .collect(),
            reward: m.reward.chunks(a).map(|c| c.to_vec()).collect(),
            reward_noise: m.reward_noise.as_ref().map(|n| n.chunks(a).map(|c| c.to_vec()).collect()),
            gamma: m.gamma,
            init_dist: m.init_dist.clone(),
            r_max: m.r_max,
        }
    }
}

impl TryFrom<MdpDoc> for TabularMdp {
    type Error = Error;

    fn try_from(d: MdpDoc) -> Result<Self> {
        let transition: Vec<f64> = d.transition.into_iter().flatten().flatten().collect();
        let reward: Vec<f64> = d.reward.into_iter().flatten().collect();
        let m = TabularMdp::new(d.n_states, d.n_actions, transition, reward, d.gamma, d.init_dist, d.r_max)?;
        match d.reward_noise {
            Some(n) => m.with_reward_noise(n.into_iter().flatten().collect()),
            None => Ok(m),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> TabularMdp {
        TabularMdp::new(2, 1, vec![0.25, 0.75, 0.0, 1.0], vec![0.3, 0.0], 0.9, vec![1.0, 0.0], 1.0).unwrap()
    }

    #[test]
    fn json_round_trip_is_exact() {
        let m = tiny()
            .with_reward_noise(vec![
                vec![RewardOutcome { value: 0.0, prob: 0.7 }, RewardOutcome { value: 1.0, prob: 0.3 }],
                vec![RewardOutcome { value: 0.0, prob: 1.0 }],
            ])
            .unwrap();
        let back = TabularMdp::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(m, back);
    }

    #[test]
    fn rejects_bad_rows() {
        assert!(TabularMdp::new(1, 1, vec![0.9], vec![0.0], 0.5, vec![1.0], 1.0).is_err());
        assert!(TabularMdp::new(1, 1, vec![1.0], vec![2.0], 0.5, vec![1.0], 1.0).is_err());
        assert!(TabularMdp::new(1, 1, vec![1.0], vec![0.0], 1.0, vec![1.0], 1.0).is_err());
    }

    #[test]
    fn detects_absorbing() {
        assert_eq!(tiny().absorbing_states(), vec![false, true]);
    }
}
