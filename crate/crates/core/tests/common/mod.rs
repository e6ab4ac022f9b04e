#![allow(dead_code)]

use std::path::PathBuf;

use hippm::{
    AffineOperator, BoxNormalCone, Matrix, MonotoneOperator, QuadraticBoxSubdifferential,
    ScaledIdentityPlusSkew, Vector,
};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn instance_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../instances")
        .join(name)
}

pub fn v(xs: &[f64]) -> Vector {
    Vector::from_row_slice(xs)
}

pub fn rot90() -> Matrix {
    Matrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0])
}

/// Planar rotation field `T(z) = Sz`, zero at the origin.
pub fn skew2() -> MonotoneOperator {
    AffineOperator::new(rot90(), Vector::zeros(2)).unwrap().into()
}

/// `T = I + S` on the plane.
pub fn strongly_monotone() -> MonotoneOperator {
    ScaledIdentityPlusSkew::rotation(1.0).into()
}

pub fn gaussian_vec(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vector {
    Vector::from_fn(n, |_, _| scale * (rng.gen::<f64>() * 2.0 - 1.0))
}

pub fn random_matrix(rng: &mut ChaCha8Rng, n: usize, m: usize) -> Matrix {
    Matrix::from_fn(n, m, |_, _| rng.gen::<f64>() * 2.0 - 1.0)
}

pub fn random_skew(rng: &mut ChaCha8Rng, n: usize) -> Matrix {
    let b = random_matrix(rng, n, n);
    &b - b.transpose()
}

/// `BᵀB + shift·I`.
pub fn random_psd(rng: &mut ChaCha8Rng, n: usize, shift: f64) -> Matrix {
    let b = random_matrix(rng, n, n);
    b.transpose() * &b + Matrix::identity(n, n) * shift
}

pub fn random_affine(rng: &mut ChaCha8Rng, n: usize) -> MonotoneOperator {
    let m = random_skew(rng, n) + random_psd(rng, n, 0.1) * 0.2;
    let q = gaussian_vec(rng, n, 1.0);
    AffineOperator::new(m, q).unwrap().into()
}

pub fn random_box(rng: &mut ChaCha8Rng, n: usize) -> BoxNormalCone {
    let mut lo = Vector::zeros(n);
    let mut hi = Vector::zeros(n);
    for i in 0..n {
        let a: f64 = rng.gen::<f64>() * 2.0 - 1.5;
        let w: f64 = rng.gen::<f64>() * 2.0;
        lo[i] = if rng.gen_bool(0.2) { f64::NEG_INFINITY } else { a };
        hi[i] = if rng.gen_bool(0.2) { f64::INFINITY } else { a + w };
    }
    BoxNormalCone::new(lo, hi).unwrap()
}

pub fn random_scaled_skew(rng: &mut ChaCha8Rng, n: usize) -> MonotoneOperator {
    let mu = rng.gen::<f64>();
    ScaledIdentityPlusSkew::new(mu, random_skew(rng, n)).unwrap().into()
}

pub fn random_quadratic_box(rng: &mut ChaCha8Rng, n: usize) -> MonotoneOperator {
    let q_mat = random_psd(rng, n, 0.05);
    let q = gaussian_vec(rng, n, 2.0);
    QuadraticBoxSubdifferential::new(q_mat, q, random_box(rng, n))
        .unwrap()
        .into()
}
