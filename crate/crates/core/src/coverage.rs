//! Coverage coefficients and feature-gram diagnostics.
//!
//! Infinity is returned as `f64::INFINITY` whenever the target measure puts
//! mass where the data measure has none; it is never replaced by a large
//! sentinel.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::function_class::{FeatureMap, FunctionClass};
use crate::linalg;
use crate::mdp::{bellman_backup, occupancy, StationaryPolicy, TabularMdp, Target, ValueFunction, WeightFunction};

/// Ridge added when the data gram is singular.
pub const FALLBACK_RIDGE: f64 = 1e-10;

/// Coverage coefficient, flagged when only an upper bound is available.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Coefficient {
    pub value: f64,
    pub upper_bound: bool,
}

/// `max d_pi / d_D` with `0/0 = 0` and `x/0 = inf`.
pub fn c_inf(d_pi: &[f64], d_d: &[f64]) -> f64 {
    d_pi.iter().zip(d_d).fold(0.0, |m, (&p, &q)| {
        let r = if p == 0.0 {
            0.0
        } else if q == 0.0 {
            f64::INFINITY
        } else {
            p / q
        };
        m.max(r)
    })
}

/// `E_{d_D}[(d_pi/d_D)^2] = sum d_pi^2 / d_D`.
pub fn chi_sq_coverage(d_pi: &[f64], d_d: &[f64]) -> f64 {
    d_pi.iter().zip(d_d).fold(0.0, |acc, (&p, &q)| {
        if p == 0.0 {
            acc
        } else if q == 0.0 {
            f64::INFINITY
        } else {
            acc + p * p / q
        }
    })
}

/// Squared norms below this are treated as exact zeros.
fn zero_tol(mdp: &TabularMdp) -> f64 {
    1e-20 * mdp.v_max().powi(2).max(1.0)
}

fn ratio(num: f64, den: f64, tol: f64) -> f64 {
    if num <= tol {
        0.0
    } else if den <= tol {
        f64::INFINITY
    } else {
        num / den
    }
}

fn bellman_errors(mdp: &TabularMdp, pi: &StationaryPolicy, members: &[ValueFunction]) -> Result<Vec<Vec<f64>>> {
    members
        .iter()
        .map(|f| {
            let tf = bellman_backup(mdp, f, Target::Policy(pi))?;
            Ok(f.values().iter().zip(tf.values()).map(|(a, b)| a - b).collect())
        })
        .collect()
}

/// Inverse square root of the symmetric PSD data gram, or an error when it
/// is singular.
fn sigma_d_inverse(gram_d: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let scale = gram_d.diagonal().amax().max(f64::MIN_POSITIVE);
    if linalg::sigma_min(gram_d) <= 1e-12 * scale {
        return Err(Error::SingularGram);
    }
    linalg::inverse(gram_d)
}

fn psd_sqrt(a: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = linalg::symmetrize(a).symmetric_eigen();
    let vals = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&vals) * eig.eigenvectors.transpose()
}

/// Squared Bellman-error ratio between `d^pi` and `d_D`, maximized over
/// the class. Finite classes are exact. Linear classes return
/// `sigma_max(S_pi^{1/2} S_D^{-1} S_pi^{1/2})`, an upper bound.
pub fn c_sq(class: &FunctionClass, mdp: &TabularMdp, pi: &StationaryPolicy, d_d: &[f64]) -> Result<Coefficient> {
    let d_pi = occupancy(mdp, pi, None)?;
    match class {
        FunctionClass::Finite { members } => {
            let tol = zero_tol(mdp);
            let value = bellman_errors(mdp, pi, members)?
                .iter()
                .map(|xi| {
                    let num: f64 = xi.iter().zip(d_pi.dist()).map(|(x, w)| w * x * x).sum();
                    let den: f64 = xi.iter().zip(d_d).map(|(x, w)| w * x * x).sum();
                    ratio(num, den, tol)
                })
                .fold(0.0, f64::max);
            Ok(Coefficient { value, upper_bound: false })
        }
        other => {
            let phi = other.as_linear().expect("linear view");
            let gram_pi = phi.gram(d_pi.dist());
            let value = match sigma_d_inverse(&phi.gram(d_d)) {
                Ok(inv) => {
                    let root = psd_sqrt(&gram_pi);
                    let m = &root * inv * &root;
                    linalg::sym_eigenvalues(&m).last().cloned().unwrap_or(0.0).max(0.0)
                }
                Err(_) => f64::INFINITY,
            };
            Ok(Coefficient { value, upper_bound: true })
        }
    }
}

/// Squared mean Bellman error under `d^pi` over its second moment under
/// `d_D`. Linear classes return `E_pi[phi]^T S_D^{-1} E_pi[phi]`.
pub fn c_avg(class: &FunctionClass, mdp: &TabularMdp, pi: &StationaryPolicy, d_d: &[f64]) -> Result<Coefficient> {
    let d_pi = occupancy(mdp, pi, None)?;
    match class {
        FunctionClass::Finite { members } => {
            let tol = zero_tol(mdp);
            let value = bellman_errors(mdp, pi, members)?
                .iter()
                .map(|xi| {
                    let mean: f64 = xi.iter().zip(d_pi.dist()).map(|(x, w)| w * x).sum();
                    let den: f64 = xi.iter().zip(d_d).map(|(x, w)| w * x * x).sum();
                    ratio(mean * mean, den, tol)
                })
                .fold(0.0, f64::max);
            Ok(Coefficient { value, upper_bound: false })
        }
        other => {
            let phi = other.as_linear().expect("linear view");
            let mu = phi.mean(d_pi.dist());
            let value = match sigma_d_inverse(&phi.gram(d_d)) {
                Ok(inv) => (mu.transpose() * inv * &mu)[(0, 0)],
                Err(_) => f64::INFINITY,
            };
            Ok(Coefficient { value, upper_bound: true })
        }
    }
}

#[derive(Clone, Debug)]
pub struct EffectiveWeight {
    pub weights: WeightFunction,
    /// True when `S_D` was singular and `FALLBACK_RIDGE` was added.
    pub ridge_used: bool,
}

/// `w(s,a) = phi(s,a)^T S_D^{-1} E_{d^pi}[phi]`, which matches feature
/// means: `E_{d_D}[w phi] = E_{d^pi}[phi]`.
pub fn effective_weight(phi: &FeatureMap, mdp: &TabularMdp, pi: &StationaryPolicy, d_d: &[f64]) -> Result<EffectiveWeight> {
    let d_pi = occupancy(mdp, pi, None)?;
    let mu = phi.mean(d_pi.dist());
    let (x, ridge_used) = linalg::solve_psd_with_fallback(&phi.gram(d_d), &mu, FALLBACK_RIDGE);
    Ok(EffectiveWeight { weights: phi.eval(x.as_slice()), ridge_used })
}

/// Smallest eigenvalue of `E_w[phi phi^T]`.
pub fn sigma_min_gram(phi: &FeatureMap, w: &[f64]) -> f64 {
    linalg::sym_eigenvalues(&phi.gram(w)).first().cloned().unwrap_or(0.0)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CoverageReport {
    pub c_inf: f64,
    pub chi_sq: f64,
    pub c_sq: Option<Coefficient>,
    pub c_avg: Option<Coefficient>,
    pub gram_d: Option<Vec<Vec<f64>>>,
    pub gram_pi: Option<Vec<Vec<f64>>>,
    pub sigma_min_d: Option<f64>,
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().cloned().collect()).collect()
}

/// All diagnostics for one target policy against a data measure.
pub fn coverage_report(
    mdp: &TabularMdp,
    pi: &StationaryPolicy,
    d_d: &[f64],
    class: Option<&FunctionClass>,
    features: Option<&FeatureMap>,
) -> Result<CoverageReport> {
    let d_pi = occupancy(mdp, pi, None)?;
    let (c_sq_v, c_avg_v) = match class {
        Some(c) => (Some(c_sq(c, mdp, pi, d_d)?), Some(c_avg(c, mdp, pi, d_d)?)),
        None => (None, None),
    };
    Ok(CoverageReport {
        c_inf: c_inf(d_pi.dist(), d_d),
        chi_sq: chi_sq_coverage(d_pi.dist(), d_d),
        c_sq: c_sq_v,
        c_avg: c_avg_v,
        gram_d: features.map(|f| rows(&f.gram(d_d))),
        gram_pi: features.map(|f| rows(&f.gram(d_pi.dist()))),
        sigma_min_d: features.map(|f| sigma_min_gram(f, d_d)),
    })
}

/// `E_{d_D}[w phi] - E_{d^pi}[phi]`, the mean-matching residual.
pub fn mean_matching_residual(phi: &FeatureMap, w: &WeightFunction, d_pi: &[f64], d_d: &[f64]) -> DVector<f64> {
    let weighted: Vec<f64> = w.values().iter().zip(d_d).map(|(a, b)| a * b).collect();
    phi.mean(&weighted) - phi.mean(d_pi)
}
