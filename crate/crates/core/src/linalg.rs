//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub fn solve(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    a.clone().lu().solve(b).ok_or(Error::SingularGram)
}

pub fn solve_transpose(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    solve(&a.transpose(), b)
}

pub fn inverse(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    a.clone().try_inverse().ok_or(Error::SingularGram)
}

pub fn symmetrize(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}

pub fn singular_values(a: &DMatrix<f64>) -> DVector<f64> {
    a.clone().svd(false, false).singular_values
}

pub fn sigma_min(a: &DMatrix<f64>) -> f64 {
    singular_values(a).iter().cloned().fold(f64::INFINITY, f64::min)
}

pub fn sigma_max(a: &DMatrix<f64>) -> f64 {
    singular_values(a).iter().cloned().fold(0.0, f64::max)
}

/// Eigenvalues of the symmetrized matrix, ascending.
pub fn sym_eigenvalues(a: &DMatrix<f64>) -> Vec<f64> {
    let mut ev: Vec<f64> = symmetrize(a).symmetric_eigen().eigenvalues.iter().cloned().collect();
    ev.sort_by(|x, y| x.total_cmp(y));
    ev
}

/// Solve a symmetric PSD system, falling back to a tiny ridge when the
/// matrix is numerically singular. Returns the solution and whether the
/// fallback was used.
pub fn solve_psd_with_fallback(a: &DMatrix<f64>, b: &DVector<f64>, ridge: f64) -> (DVector<f64>, bool) {
    let sym = symmetrize(a);
    let scale = sym.diagonal().amax().max(1.0);
    if sigma_min(&sym) > 1e-12 * scale {
        if let Some(ch) = sym.clone().cholesky() {
            return (ch.solve(b), false);
        }
    }
    let n = sym.nrows();
    let reg = sym + DMatrix::identity(n, n) * ridge;
    let x = reg.clone().lu().solve(b).unwrap_or_else(|| DVector::zeros(n));
    (x, true)
}

/// Numerical rank: singular values above `rel_tol * sigma_max`.
pub fn rank(a: &DMatrix<f64>, rel_tol: f64) -> usize {
    let sv = singular_values(a);
    let top = sv.iter().cloned().fold(0.0, f64::max);
    sv.iter().filter(|&&v| v > rel_tol * top).count()
}
