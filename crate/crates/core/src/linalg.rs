//! Small dense linear-algebra helpers shared by the modules.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Default central finite-difference step.
pub const FD_STEP: f64 = 1e-6;

/// Largest singular value (Euclidean operator norm).
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    if m.ncols() == 1 || m.nrows() == 1 {
        return m.norm();
    }
    let diagonal = (0..m.nrows()).all(|i| (0..m.ncols()).all(|j| i == j || m[(i, j)] == 0.0));
    if diagonal {
        return m.diagonal().amax();
    }
    m.singular_values().max()
}

pub fn all_finite(v: &DVector<f64>) -> bool {
    v.iter().all(|x| x.is_finite())
}

pub fn ensure_finite(v: DVector<f64>, context: &str) -> Result<DVector<f64>> {
    if all_finite(&v) {
        Ok(v)
    } else {
        Err(Error::NonFinite {
            context: context.to_string(),
            substep: 0,
        })
    }
}

pub fn check_dim(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            what,
            expected,
            got,
        })
    }
}

/// Central-difference Jacobian of `f` at `x`.
///
/// `diff` computes `f(x+) - f(x-)`; periodic callers use it to unwrap
/// differences that cross the fundamental domain.
pub fn fd_jacobian<F, D>(f: F, diff: D, x: &DVector<f64>, step: f64) -> Result<DMatrix<f64>>
where
    F: Fn(&DVector<f64>) -> Result<DVector<f64>>,
    D: Fn(&DVector<f64>, &DVector<f64>) -> DVector<f64>,
{
    let n = x.len();
    let mut cols = Vec::with_capacity(n);
    for j in 0..n {
        let h = step * x[j].abs().max(1.0);
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[j] += h;
        xm[j] -= h;
        let fp = f(&xp)?;
        let fm = f(&xm)?;
        let col = diff(&fp, &fm) / (2.0 * h);
        if !all_finite(&col) {
            return Err(Error::NonFinite {
                context: format!("finite-difference column {j}"),
                substep: 0,
            });
        }
        cols.push(col);
    }
    let rows = cols.first().map_or(0, |c| c.len());
    Ok(DMatrix::from_fn(rows, n, |i, j| cols[j][i]))
}

pub fn plain_diff(a: &DVector<f64>, b: &DVector<f64>) -> DVector<f64> {
    a - b
}

/// Relative Frobenius discrepancy `|a - b| / max(|b|, floor)`.
pub fn relative_error(a: &DMatrix<f64>, b: &DMatrix<f64>, floor: f64) -> f64 {
    (a - b).norm() / b.norm().max(floor)
}
