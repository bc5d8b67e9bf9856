//! Named problem instances with everything needed to run estimators and
//! optimizers against exact truths.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::cell_rng;
use crate::error::{Error, Result};
use crate::function_class::{gen_low_rank_mdp, simplex_point, FeatureMap, FunctionClass};
use crate::mdp::{greedy, occupancy, solve_q, OccupancyMeasure, RewardOutcome, StationaryPolicy, TabularMdp, Target, ValueFunction};

/// Knobs accepted by [`build_scenario`]. Unused fields are ignored by
/// scenarios that do not need them.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioParams {
    pub gamma: Option<f64>,
    pub horizon: Option<usize>,
    pub n_states: Option<usize>,
    pub n_actions: Option<usize>,
    pub dim: Option<usize>,
    pub seed: Option<u64>,
    /// Bernoulli arm means.
    pub arms: Option<Vec<f64>>,
    /// Behavior action probabilities (bandit).
    pub behavior: Option<Vec<f64>>,
    /// Extra candidate models besides the truth.
    pub n_models: Option<usize>,
}

#[derive(Clone, Debug)]
pub struct Scenario {
    pub name: String,
    pub mdp: TabularMdp,
    pub behavior: StationaryPolicy,
    /// Sampling distribution for tuple datasets.
    pub data_dist: OccupancyMeasure,
    /// Episode length for trajectory datasets.
    pub horizon: Option<usize>,
    /// `"pi"` is the evaluation target, `"cp"` the comparator.
    pub targets: BTreeMap<String, StationaryPolicy>,
    /// Finite policy class for search-based optimizers.
    pub policies: Vec<StationaryPolicy>,
    /// `"F"` value class, `"W"` weight class, plus scenario-specific extras.
    pub classes: BTreeMap<String, FunctionClass>,
    pub features: Option<FeatureMap>,
    /// Candidate transition models; the truth is always index 0.
    pub models: Vec<TabularMdp>,
    pub notes: String,
}

impl Scenario {
    pub fn target(&self) -> &StationaryPolicy {
        &self.targets["pi"]
    }

    pub fn comparator(&self) -> &StationaryPolicy {
        &self.targets["cp"]
    }

    pub fn class(&self, key: &str) -> Result<&FunctionClass> {
        self.classes.get(key).ok_or_else(|| Error::UnknownIdentifier(format!("scenario {} has no class {key}", self.name)))
    }

    /// Short human-readable description used by the CLI.
    pub fn summary(&self) -> String {
        let mut out = format!(
            "scenario {}: |S|={} |A|={} gamma={} v_max={}\n",
            self.name,
            self.mdp.n_states(),
            self.mdp.n_actions(),
            self.mdp.gamma(),
            self.mdp.v_max()
        );
        for (k, pi) in &self.targets {
            out.push_str(&format!("  J({k}) = {:.6}\n", crate::mdp::policy_return(&self.mdp, pi, None)));
        }
        for (k, c) in &self.classes {
            let kind = match c {
                FunctionClass::Finite { members } => format!("finite ({} members)", members.len()),
                FunctionClass::Linear { features, .. } => format!("linear (dim {})", features.dim()),
                FunctionClass::PiecewiseConstant { partition } => format!("piecewise ({} cells)", partition.n_cells()),
            };
            out.push_str(&format!("  class {k}: {kind}\n"));
        }
        out.push_str(&format!("  policies: {}  models: {}\n", self.policies.len(), self.models.len()));
        if let Some(h) = self.horizon {
            out.push_str(&format!("  horizon: {h}\n"));
        }
        out.push_str(&format!("  {}\n", self.notes));
        out
    }
}

pub const SCENARIOS: &[&str] = &["loop", "tree", "divergence", "bandit", "lowrank", "random", "two_model"];

pub fn build_scenario(name: &str, params: &ScenarioParams) -> Result<Scenario> {
    let gamma = params.gamma;
    if let Some(g) = gamma {
        if !(0.0..1.0).contains(&g) {
            return Err(Error::InvalidParams(format!("gamma {g} outside [0, 1)")));
        }
    }
    match name {
        "loop" => loop_scenario(params.horizon.unwrap_or(4), gamma.unwrap_or(0.9)),
        "tree" => tree_scenario(params.n_actions.unwrap_or(2), params.horizon.unwrap_or(3), gamma.unwrap_or(0.9)),
        "divergence" => divergence_scenario(gamma.unwrap_or(0.95)),
        "bandit" => bandit_scenario(
            params.arms.clone().unwrap_or_else(|| vec![0.7, 0.8, 0.5]),
            params.behavior.clone().unwrap_or_else(|| vec![0.9, 0.05, 0.05]),
        ),
        "lowrank" => lowrank_scenario(
            params.dim.unwrap_or(2),
            params.n_states.unwrap_or(6),
            params.n_actions.unwrap_or(2),
            gamma.unwrap_or(0.9),
            params.seed.unwrap_or(0),
        ),
        "random" => random_scenario(
            params.n_states.unwrap_or(4),
            params.n_actions.unwrap_or(2),
            gamma.unwrap_or(0.9),
            params.seed.unwrap_or(0),
            params.n_models.unwrap_or(4),
        ),
        "two_model" => two_model_scenario(gamma.unwrap_or(0.9)),
        other => Err(Error::UnknownScenario(other.to_string())),
    }
}

fn uniform_over_pairs(mdp: &TabularMdp) -> OccupancyMeasure {
    OccupancyMeasure::uniform(mdp.n_states(), mdp.n_actions())
}

fn tabular_classes(ns: usize, na: usize) -> BTreeMap<String, FunctionClass> {
    let mut classes = BTreeMap::new();
    classes.insert("F".to_string(), FunctionClass::tabular(ns, na));
    classes.insert("W".to_string(), FunctionClass::tabular(ns, na));
    classes
}

fn targets(pi: StationaryPolicy, cp: StationaryPolicy) -> BTreeMap<String, StationaryPolicy> {
    BTreeMap::from([("pi".to_string(), pi), ("cp".to_string(), cp)])
}

/// One looping state unrolled over `H` steps: state `t` moves to `t + 1`
/// under both actions, action 0 pays 1 and action 1 pays 0, and state `H`
/// is absorbing. The target always plays action 0 and the behavior is
/// uniform, so each step contributes a factor 2 to the importance weight.
fn loop_scenario(h: usize, gamma: f64) -> Result<Scenario> {
    if h == 0 {
        return Err(Error::InvalidParams("loop horizon must be positive".into()));
    }
    let ns = h + 1;
    let mut transition = vec![0.0; ns * 2 * ns];
    let mut reward = vec![0.0; ns * 2];
    for s in 0..ns {
        let next = (s + 1).min(h);
        for a in 0..2 {
            transition[(s * 2 + a) * ns + next] = 1.0;
        }
        if s < h {
            reward[s * 2] = 1.0;
        }
    }
    let mut init = vec![0.0; ns];
    init[0] = 1.0;
    let mdp = TabularMdp::new(ns, 2, transition, reward, gamma, init, 1.0)?;
    let behavior = StationaryPolicy::uniform(ns, 2);
    let pi = StationaryPolicy::constant(ns, 2, 0)?;
    let data_dist = occupancy(&mdp, &behavior, None)?;
    Ok(Scenario {
        name: "loop".into(),
        behavior,
        data_dist,
        horizon: Some(h),
        targets: targets(pi.clone(), pi.clone()),
        policies: vec![pi, StationaryPolicy::constant(ns, 2, 1)?],
        classes: tabular_classes(ns, 2),
        features: None,
        models: vec![mdp.clone()],
        mdp,
        notes: format!("single looping state, two actions, unrolled for {h} steps"),
    })
}

/// Complete `branching`-ary tree of depth `depth` with deterministic moves.
/// Node ids are assigned level by level; leaves are absorbing. Reward 1 is
/// paid for the last move along the all-zeros path.
fn tree_scenario(branching: usize, depth: usize, gamma: f64) -> Result<Scenario> {
    if branching < 2 || depth == 0 {
        return Err(Error::InvalidParams("tree needs branching >= 2 and depth >= 1".into()));
    }
    let level_start: Vec<usize> = (0..=depth).map(|l| (0..l).map(|k| branching.pow(k as u32)).sum()).collect();
    let ns = level_start[depth] + branching.pow(depth as u32);
    let na = branching;
    let mut transition = vec![0.0; ns * na * ns];
    let mut reward = vec![0.0; ns * na];
    for l in 0..=depth {
        for i in 0..branching.pow(l as u32) {
            let s = level_start[l] + i;
            for a in 0..na {
                let next = if l < depth { level_start[l + 1] + i * branching + a } else { s };
                transition[(s * na + a) * ns + next] = 1.0;
            }
        }
    }
    reward[level_start[depth - 1] * na] = 1.0;
    let mut init = vec![0.0; ns];
    init[0] = 1.0;
    let mdp = TabularMdp::new(ns, na, transition, reward, gamma, init, 1.0)?;
    let behavior = StationaryPolicy::uniform(ns, na);
    let pi = StationaryPolicy::constant(ns, na, 0)?;
    let data_dist = occupancy(&mdp, &behavior, None)?;
    Ok(Scenario {
        name: "tree".into(),
        behavior,
        data_dist,
        horizon: Some(depth),
        targets: targets(pi.clone(), pi.clone()),
        policies: tree_path_policies(branching, depth)?,
        classes: tabular_classes(ns, na),
        features: None,
        models: vec![mdp.clone()],
        mdp,
        notes: format!("deterministic complete tree, branching {branching}, depth {depth}"),
    })
}

/// One deterministic policy per root-to-leaf path (off-path nodes play 0).
pub fn tree_path_policies(branching: usize, depth: usize) -> Result<Vec<StationaryPolicy>> {
    let level_start: Vec<usize> = (0..=depth).map(|l| (0..l).map(|k| branching.pow(k as u32)).sum()).collect();
    let ns = level_start[depth] + branching.pow(depth as u32);
    let mut out = Vec::new();
    for leaf in 0..branching.pow(depth as u32) {
        let mut actions = vec![0usize; ns];
        let mut node = 0usize;
        for l in 0..depth {
            let a = (leaf / branching.pow((depth - 1 - l) as u32)) % branching;
            actions[level_start[l] + node] = a;
            node = node * branching + a;
        }
        out.push(StationaryPolicy::deterministic(branching, &actions)?);
    }
    Ok(out)
}

/// Two states, one action, zero reward, both states move to state 1.
/// Features are `phi = (1, 2)` and the data weights both states equally.
fn divergence_scenario(gamma: f64) -> Result<Scenario> {
    let mdp = TabularMdp::new(2, 1, vec![0.0, 1.0, 0.0, 1.0], vec![0.0, 0.0], gamma, vec![0.5, 0.5], 1.0)?;
    let phi = FeatureMap::from_features(2, 1, 1, vec![1.0, 2.0])?;
    let pi = StationaryPolicy::uniform(2, 1);
    let mut classes = BTreeMap::new();
    classes.insert("F".to_string(), FunctionClass::linear(phi.clone()));
    classes.insert(
        "F_finite".to_string(),
        FunctionClass::finite(vec![ValueFunction::zeros(2, 1), phi.eval(&[1.0])])?,
    );
    Ok(Scenario {
        name: "divergence".into(),
        behavior: pi.clone(),
        data_dist: uniform_over_pairs(&mdp),
        horizon: None,
        targets: targets(pi.clone(), pi.clone()),
        policies: vec![pi],
        classes,
        features: Some(phi),
        models: vec![mdp.clone()],
        mdp,
        notes: "two-state chain with features (1, 2) and zero rewards".into(),
    })
}

/// One state, Bernoulli arms, gamma = 0. The value class is the grid
/// `{0, 0.1, .., 1}^|A|` of reward vectors; the comparator is arm 0.
fn bandit_scenario(arms: Vec<f64>, behavior: Vec<f64>) -> Result<Scenario> {
    let na = arms.len();
    if na < 2 || na > 5 || behavior.len() != na {
        return Err(Error::InvalidParams("bandit needs 2 to 5 arms and matching behavior".into()));
    }
    if arms.iter().any(|m| !(0.0..=1.0).contains(m)) {
        return Err(Error::InvalidParams("arm means must lie in [0, 1]".into()));
    }
    let noise: Vec<Vec<RewardOutcome>> = arms
        .iter()
        .map(|&m| vec![RewardOutcome { value: 1.0, prob: m }, RewardOutcome { value: 0.0, prob: 1.0 - m }])
        .collect();
    let mdp = TabularMdp::new(1, na, vec![1.0; na], arms.clone(), 0.0, vec![1.0], 1.0)?.with_reward_noise(noise)?;
    let behavior = StationaryPolicy::new(1, na, behavior)?;
    let data_dist = OccupancyMeasure::new(1, na, behavior.probs().to_vec())?;
    let mut members = Vec::with_capacity(11usize.pow(na as u32));
    for code in 0..11usize.pow(na as u32) {
        let v: Vec<f64> = (0..na).map(|a| ((code / 11usize.pow(a as u32)) % 11) as f64 / 10.0).collect();
        members.push(ValueFunction::new(1, na, v)?);
    }
    let mut classes = BTreeMap::new();
    classes.insert("F".to_string(), FunctionClass::finite(members)?);
    classes.insert("F_tabular".to_string(), FunctionClass::tabular(1, na));
    let policies: Vec<StationaryPolicy> = (0..na).map(|a| StationaryPolicy::constant(1, na, a)).collect::<Result<_>>()?;
    Ok(Scenario {
        name: "bandit".into(),
        behavior,
        data_dist,
        horizon: Some(1),
        targets: targets(policies[0].clone(), policies[0].clone()),
        policies,
        classes,
        features: Some(FeatureMap::tabular(1, na)),
        models: vec![mdp.clone()],
        mdp,
        notes: format!("Bernoulli bandit with means {arms:?}"),
    })
}

/// Generated rank-`d` MDP. Data are drawn from the average of the `psi_k`
/// with uniform actions, which covers every policy to within `|A| d`.
fn lowrank_scenario(d: usize, ns: usize, na: usize, gamma: f64, seed: u64) -> Result<Scenario> {
    let lr = gen_low_rank_mdp(d, ns, na, gamma, seed)?;
    let mdp = lr.mdp.clone();
    let state_dist: Vec<f64> = (0..ns).map(|s| lr.psi.iter().map(|p| p[s]).sum::<f64>() / d as f64).collect();
    let dist: Vec<f64> = (0..ns * na).map(|p| state_dist[p / na] / na as f64).collect();
    let data_dist = OccupancyMeasure::new(ns, na, dist)?;
    let behavior = StationaryPolicy::uniform(ns, na);
    let opt = greedy(&solve_q(&mdp, Target::Optimality, 1e-12)?);
    let mut classes = BTreeMap::new();
    classes.insert("F".to_string(), FunctionClass::linear(lr.features.clone()));
    classes.insert("F_tabular".to_string(), FunctionClass::tabular(ns, na));
    Ok(Scenario {
        name: "lowrank".into(),
        behavior: behavior.clone(),
        data_dist,
        horizon: None,
        targets: targets(behavior, opt),
        policies: StationaryPolicy::enumerate_deterministic(ns, na),
        classes,
        features: Some(lr.features),
        models: vec![mdp.clone()],
        mdp,
        notes: format!("rank-{d} linear MDP (seed {seed})"),
    })
}

/// Random dense MDP with full coverage. Candidate models mix the truth with
/// random kernels at increasing strength.
fn random_scenario(ns: usize, na: usize, gamma: f64, seed: u64, n_models: usize) -> Result<Scenario> {
    if ns == 0 || na == 0 {
        return Err(Error::InvalidParams("random scenario needs states and actions".into()));
    }
    let mut rng = cell_rng(seed, 0);
    let transition: Vec<f64> = (0..ns * na).flat_map(|_| simplex_point(&mut rng, ns)).collect();
    let reward: Vec<f64> = (0..ns * na).map(|_| rng.gen::<f64>()).collect();
    let init = simplex_point(&mut rng, ns);
    let pi_probs: Vec<f64> = (0..ns).flat_map(|_| simplex_point(&mut rng, na)).collect();
    let b_probs: Vec<f64> = (0..ns)
        .flat_map(|_| simplex_point(&mut rng, na).into_iter().map(|x| 0.5 / na as f64 + 0.5 * x).collect::<Vec<_>>())
        .collect();
    let mdp = TabularMdp::new(ns, na, transition.clone(), reward, gamma, init, 1.0)?;
    let pi = StationaryPolicy::new(ns, na, pi_probs)?;
    let behavior = StationaryPolicy::new(ns, na, b_probs)?;
    let opt = greedy(&solve_q(&mdp, Target::Optimality, 1e-12)?);
    let mut models = vec![mdp.clone()];
    for m in 0..n_models {
        let alpha = 0.25 * (m + 1) as f64 / n_models as f64;
        let noise: Vec<f64> = (0..ns * na).flat_map(|_| simplex_point(&mut rng, ns)).collect();
        let mixed: Vec<f64> = transition.iter().zip(&noise).map(|(p, q)| (1.0 - alpha) * p + alpha * q).collect();
        models.push(mdp.with_transition(mixed)?);
    }
    let mut policies = StationaryPolicy::enumerate_deterministic(ns, na);
    policies.truncate(64);
    policies.push(behavior.clone());
    let data_dist = uniform_over_pairs(&mdp);
    Ok(Scenario {
        name: "random".into(),
        behavior,
        data_dist,
        horizon: None,
        targets: targets(pi, opt),
        policies,
        classes: tabular_classes(ns, na),
        features: Some(FeatureMap::tabular(ns, na)),
        models,
        mdp,
        notes: format!("random {ns}x{na} MDP (seed {seed}) with {n_models} perturbed models"),
    })
}

/// Start state 0 moves to the paying state 1 with an action-dependent
/// probability, otherwise to the absorbing state 2; state 1 pays 1 and then
/// absorbs. Two candidate models disagree about the success probabilities:
/// model A says (0.9, 0.5), model B says (0.2, 0.3). The reference policy
/// mixes both actions evenly.
fn two_model_scenario(gamma: f64) -> Result<Scenario> {
    let build = |p0: f64, p1: f64| -> Result<TabularMdp> {
        let mut t = vec![0.0; 3 * 2 * 3];
        t[0 * 3 + 1] = p0;
        t[0 * 3 + 2] = 1.0 - p0;
        t[3 + 1] = p1;
        t[3 + 2] = 1.0 - p1;
        for a in 0..2 {
            t[(2 + a) * 3 + 2] = 1.0;
            t[(4 + a) * 3 + 2] = 1.0;
        }
        TabularMdp::new(3, 2, t, vec![0.0, 0.0, 1.0, 1.0, 0.0, 0.0], gamma, vec![1.0, 0.0, 0.0], 1.0)
    };
    let a = build(0.9, 0.5)?;
    let b = build(0.2, 0.3)?;
    let reference = StationaryPolicy::uniform(3, 2);
    let policies = vec![
        StationaryPolicy::constant(3, 2, 0)?,
        StationaryPolicy::constant(3, 2, 1)?,
        reference.clone(),
    ];
    let mut dist = vec![0.0; 6];
    dist[0] = 0.5;
    dist[1] = 0.5;
    Ok(Scenario {
        name: "two_model".into(),
        behavior: reference.clone(),
        data_dist: OccupancyMeasure::new(3, 2, dist)?,
        horizon: Some(2),
        targets: targets(reference.clone(), reference),
        policies,
        classes: tabular_classes(3, 2),
        features: None,
        models: vec![a.clone(), b],
        mdp: a,
        notes: "two plausible models that rank policies differently".into(),
    })
}
