use nalgebra::{DMatrix, DVector};

use super::{FeatureMap, FunctionClass};
use crate::data::TupleDataset;
use crate::error::{Error, Result};
use crate::linalg;
use crate::mdp::ValueFunction;

/// Outcome of a regression or projection onto a class.
#[derive(Clone, Debug)]
pub struct Fit {
    pub f: ValueFunction,
    /// Coefficients for linear and piecewise-constant classes.
    pub coef: Option<Vec<f64>>,
    /// Member index for finite classes.
    pub index: Option<usize>,
}

fn clip_norm(theta: DVector<f64>, bound: f64) -> DVector<f64> {
    let norm = theta.norm();
    if norm > bound {
        theta * (bound / norm)
    } else {
        theta
    }
}

/// Solve `(G + ridge I) theta = b`, refusing an unridged singular gram.
fn solve_normal(g: DMatrix<f64>, b: DVector<f64>, ridge: f64) -> Result<DVector<f64>> {
    let d = g.nrows();
    let g = linalg::symmetrize(&g) + DMatrix::identity(d, d) * ridge;
    let scale = g.diagonal().amax().max(f64::MIN_POSITIVE);
    if linalg::sigma_min(&g) <= 1e-12 * scale {
        return Err(Error::SingularGram);
    }
    match g.clone().cholesky() {
        Some(ch) => Ok(ch.solve(&b)),
        None => linalg::solve(&g, &b),
    }
}

/// Weighted least squares onto the class. `points[i]` is a pair index with
/// weight `weights[i]` and target `targets[i]`.
fn weighted_fit(
    class: &FunctionClass,
    points: &[usize],
    weights: &[f64],
    targets: &[f64],
    ridge: f64,
    empty_cell: EmptyCell,
) -> Result<Fit> {
    let (ns, na) = class.shape();
    match class {
        FunctionClass::Finite { members } => {
            let mut best = (f64::INFINITY, 0);
            for (i, m) in members.iter().enumerate() {
                let loss: f64 = points
                    .iter()
                    .zip(weights)
                    .zip(targets)
                    .map(|((&p, &w), &y)| w * (m.values()[p] - y).powi(2))
                    .sum();
                if loss < best.0 {
                    best = (loss, i);
                }
            }
            Ok(Fit { f: members[best.1].clone(), coef: None, index: Some(best.1) })
        }
        FunctionClass::Linear { features, coef_bound } => {
            let (g, b) = normal_equations(features, points, weights, targets);
            let theta = clip_norm(solve_normal(g, b, ridge)?, *coef_bound);
            Ok(Fit { f: features.eval(theta.as_slice()), coef: Some(theta.iter().cloned().collect()), index: None })
        }
        FunctionClass::PiecewiseConstant { partition } => {
            let k = partition.n_cells();
            let mut num = vec![0.0; k];
            let mut den = vec![0.0; k];
            for ((&p, &w), &y) in points.iter().zip(weights).zip(targets) {
                let c = partition.cell_of(p);
                num[c] += w * y;
                den[c] += w;
            }
            let coef: Vec<f64> = (0..k)
                .map(|c| {
                    if den[c] > 0.0 {
                        num[c] / den[c]
                    } else {
                        match empty_cell {
                            EmptyCell::Zero => 0.0,
                            EmptyCell::Uniform => {
                                let members: Vec<usize> =
                                    (0..ns * na).filter(|&p| partition.cell_of(p) == c).collect();
                                let m = members.len() as f64;
                                points
                                    .iter()
                                    .zip(targets)
                                    .filter(|(p, _)| members.contains(p))
                                    .map(|(_, y)| y / m)
                                    .sum()
                            }
                        }
                    }
                })
                .collect();
            let values = (0..ns * na).map(|p| coef[partition.cell_of(p)]).collect();
            Ok(Fit { f: ValueFunction::raw(ns, na, values), coef: Some(coef), index: None })
        }
    }
}

#[derive(Clone, Copy)]
enum EmptyCell {
    Zero,
    Uniform,
}

fn normal_equations(features: &FeatureMap, points: &[usize], weights: &[f64], targets: &[f64]) -> (DMatrix<f64>, DVector<f64>) {
    let d = features.dim();
    let mut g = DMatrix::zeros(d, d);
    let mut b = DVector::zeros(d);
    for ((&p, &w), &y) in points.iter().zip(weights).zip(targets) {
        if w == 0.0 {
            continue;
        }
        let phi = features.phi(p);
        for i in 0..d {
            if phi[i] == 0.0 {
                continue;
            }
            b[i] += w * phi[i] * y;
            for j in 0..d {
                g[(i, j)] += w * phi[i] * phi[j];
            }
        }
    }
    (g, b)
}

/// Empirical least squares of `targets[i]` on the tuples' pairs.
///
/// Finite classes return the lowest-index minimizer. Linear classes solve
/// `(E_D[phi phi^T] + ridge I) theta = E_D[phi y]` and rescale `theta` onto
/// the norm ball. Piecewise-constant classes average targets per cell, with
/// 0 for cells that saw no data.
pub fn fit_least_squares(class: &FunctionClass, tuples: &TupleDataset, targets: &[f64], ridge: f64) -> Result<Fit> {
    if targets.len() != tuples.len() {
        return Err(Error::ShapeMismatch("one target per tuple required".into()));
    }
    let (_, na) = class.shape();
    let points: Vec<usize> = tuples.tuples.iter().map(|t| t.s * na + t.a).collect();
    let w = 1.0 / tuples.len().max(1) as f64;
    let weights = vec![w; points.len()];
    weighted_fit(class, &points, &weights, targets, ridge, EmptyCell::Zero)
}

/// Exact weighted projection `argmin_{g in F} |f - g|_{2,w}`. Zero-mass
/// cells of a piecewise-constant class take the unweighted cell mean.
pub fn project(class: &FunctionClass, f: &ValueFunction, weighting: &[f64]) -> Result<Fit> {
    if weighting.len() != f.values().len() {
        return Err(Error::ShapeMismatch("weighting must cover every pair".into()));
    }
    let points: Vec<usize> = (0..f.values().len()).collect();
    weighted_fit(class, &points, weighting, f.values(), 0.0, EmptyCell::Uniform)
}
