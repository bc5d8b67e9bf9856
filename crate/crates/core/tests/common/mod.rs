//! Instance generators and brute-force oracles shared by the integration
//! tests. Nothing here calls the solvers under test.

#![allow(dead_code)]

use offrl::mdp::{RewardOutcome, StationaryPolicy, TabularMdp, ValueFunction};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn simplex<R: Rng>(rng: &mut R, k: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..k).map(|_| -rng.gen::<f64>().max(1e-12).ln()).collect();
    let z: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / z).collect()
}

pub fn random_mdp<R: Rng>(rng: &mut R, ns: usize, na: usize, gamma: f64) -> TabularMdp {
    let transition: Vec<f64> = (0..ns * na).flat_map(|_| simplex(rng, ns)).collect();
    let reward: Vec<f64> = (0..ns * na).map(|_| rng.gen::<f64>()).collect();
    let init = simplex(rng, ns);
    TabularMdp::new(ns, na, transition, reward, gamma, init, 1.0).unwrap()
}

/// Random MDP whose rewards are two-point distributions around the means.
pub fn noisy_mdp<R: Rng>(rng: &mut R, ns: usize, na: usize, gamma: f64) -> TabularMdp {
    let mdp = random_mdp(rng, ns, na, gamma);
    let noise = mdp
        .reward()
        .iter()
        .map(|&r| {
            let h = rng.gen::<f64>() * r.min(1.0 - r);
            vec![RewardOutcome { value: r - h, prob: 0.5 }, RewardOutcome { value: r + h, prob: 0.5 }]
        })
        .collect();
    mdp.with_reward_noise(noise).unwrap()
}

/// Deterministic-transition MDP: pair `p` moves to `next[p]`.
pub fn deterministic_mdp(ns: usize, na: usize, next: &[usize], reward: Vec<f64>, gamma: f64, init: Vec<f64>) -> TabularMdp {
    let mut transition = vec![0.0; ns * na * ns];
    for (p, &s2) in next.iter().enumerate() {
        transition[p * ns + s2] = 1.0;
    }
    TabularMdp::new(ns, na, transition, reward, gamma, init, 1.0).unwrap()
}

/// One state, two actions paying 1 and 0.
pub fn loop_mdp(gamma: f64) -> TabularMdp {
    TabularMdp::new(1, 2, vec![1.0, 1.0], vec![1.0, 0.0], gamma, vec![1.0], 1.0).unwrap()
}

pub fn random_policy<R: Rng>(rng: &mut R, ns: usize, na: usize) -> StationaryPolicy {
    StationaryPolicy::new(ns, na, (0..ns).flat_map(|_| simplex(rng, na)).collect()).unwrap()
}

pub fn random_function<R: Rng>(rng: &mut R, ns: usize, na: usize, scale: f64) -> ValueFunction {
    ValueFunction::new(ns, na, (0..ns * na).map(|_| scale * (2.0 * rng.gen::<f64>() - 1.0)).collect()).unwrap()
}

/// `sum_a pi(a|s) f(s, a)` for every state.
pub fn v_of(f: &[f64], pi: &StationaryPolicy) -> Vec<f64> {
    let na = pi.n_actions();
    (0..pi.n_states()).map(|s| (0..na).map(|a| pi.prob(s, a) * f[s * na + a]).sum()).collect()
}

/// Policy evaluation by plain fixed-point iteration until the update is
/// below `tol`.
pub fn iterate_q(mdp: &TabularMdp, pi: &StationaryPolicy, tol: f64) -> Vec<f64> {
    let (ns, na) = (mdp.n_states(), mdp.n_actions());
    let mut q = vec![0.0; ns * na];
    loop {
        let v = v_of(&q, pi);
        let next: Vec<f64> =
            (0..ns * na).map(|p| mdp.reward()[p] + mdp.gamma() * (0..ns).map(|s2| mdp.p(p / na, p % na, s2) * v[s2]).sum::<f64>()).collect();
        let change = next.iter().zip(&q).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        q = next;
        if change < tol {
            return q;
        }
    }
}

/// Optimal Q by value iteration.
pub fn iterate_q_star(mdp: &TabularMdp, tol: f64) -> Vec<f64> {
    let (ns, na) = (mdp.n_states(), mdp.n_actions());
    let mut q = vec![0.0; ns * na];
    loop {
        let v: Vec<f64> = (0..ns).map(|s| q[s * na..(s + 1) * na].iter().cloned().fold(f64::NEG_INFINITY, f64::max)).collect();
        let next: Vec<f64> =
            (0..ns * na).map(|p| mdp.reward()[p] + mdp.gamma() * (0..ns).map(|s2| mdp.p(p / na, p % na, s2) * v[s2]).sum::<f64>()).collect();
        let change = next.iter().zip(&q).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        q = next;
        if change < tol {
            return q;
        }
    }
}

/// `(1 - gamma) sum_{t <= horizon} gamma^t d_t` by forward propagation.
pub fn truncated_occupancy(mdp: &TabularMdp, pi: &StationaryPolicy, horizon: usize) -> Vec<f64> {
    let (ns, na) = (mdp.n_states(), mdp.n_actions());
    let g = mdp.gamma();
    let mut d_t: Vec<f64> = (0..ns * na).map(|p| mdp.init_dist()[p / na] * pi.prob(p / na, p % na)).collect();
    let mut out = vec![0.0; ns * na];
    let mut w = 1.0 - g;
    for _ in 0..=horizon {
        for (o, x) in out.iter_mut().zip(&d_t) {
            *o += w * x;
        }
        let mut next_s = vec![0.0; ns];
        for (p, &m) in d_t.iter().enumerate() {
            for (s2, ns_mass) in next_s.iter_mut().enumerate() {
                *ns_mass += m * mdp.p(p / na, p % na, s2);
            }
        }
        d_t = (0..ns * na).map(|p| next_s[p / na] * pi.prob(p / na, p % na)).collect();
        w *= g;
    }
    out
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
