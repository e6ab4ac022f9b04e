//! Dense linear-algebra helpers shared by the operator catalog and the solvers.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{HippmError, Result};

pub type Vector = DVector<f64>;
pub type Matrix = DMatrix<f64>;

pub(crate) fn ensure_finite_vec(v: &Vector, what: &'static str) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(HippmError::NonFinite(what))
    }
}

pub(crate) fn ensure_finite_mat(m: &Matrix, what: &'static str) -> Result<()> {
    if m.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(HippmError::NonFinite(what))
    }
}

pub(crate) fn ensure_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(HippmError::DimensionMismatch { expected, got })
    }
}

pub(crate) fn ensure_square(m: &Matrix, n: usize) -> Result<()> {
    ensure_dim(n, m.nrows())?;
    ensure_dim(n, m.ncols())
}

/// Extreme eigenvalues `(min, max)` of a symmetric matrix. Empty matrices give `(0, 0)`.
pub fn symmetric_eigen_bounds(m: &Matrix) -> (f64, f64) {
    if m.nrows() == 0 {
        return (0.0, 0.0);
    }
    let eig = SymmetricEigen::new(m.clone());
    let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    let max = eig.eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (min, max)
}

/// Componentwise projection onto `[lower, upper]`; infinite bounds behave as IEEE comparisons.
pub fn clamp_box(y: &Vector, lower: &Vector, upper: &Vector) -> Vector {
    Vector::from_iterator(
        y.len(),
        y.iter()
            .zip(lower.iter().zip(upper.iter()))
            .map(|(&v, (&lo, &hi))| v.max(lo).min(hi)),
    )
}

/// Reference-grade resolvent accuracy used for residuals and ground-truth comparisons.
pub fn reference_tol(z: &Vector) -> f64 {
    1e-13 * (1.0 + z.norm())
}

/// `anchor / (k+2) + (k+1)/(k+2) * point`, componentwise.
pub(crate) fn anchored_combination(anchor: &Vector, point: &Vector, k: usize) -> Vector {
    let denom = (k + 2) as f64;
    let wa = 1.0 / denom;
    let wb = (k + 1) as f64 / denom;
    anchor.zip_map(point, |a, b| wa * a + wb * b)
}
