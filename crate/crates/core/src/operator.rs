//! Finite-dimensional maximal monotone operators and their resolvents.
//!
//! The catalog has four families. Three of them have closed-form resolvents
//! (a dense linear solve or a clamp); the quadratic-over-box subdifferential is
//! evaluated by the certified inner minimizer in [`crate::inner`], which reports
//! an upper bound on its distance to the true resolvent value.

use nalgebra::LU;

use crate::error::{HippmError, Result};
use crate::inner::BoxQuadratic;
use crate::linalg::{
    clamp_box, ensure_dim, ensure_finite_mat, ensure_finite_vec, ensure_square, reference_tol,
    symmetric_eigen_bounds, Matrix, Vector,
};

/// Iteration cap for the inner minimizer behind inexact resolvents.
pub const INNER_MAX_ITER: usize = 200_000;

/// Largest dimension for which `zero_point` enumerates active sets of a box QP.
const KKT_ENUMERATION_MAX_DIM: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct ResolventResult {
    pub point: Vector,
    /// Certified upper bound on `‖point − P_c(y)‖`.
    pub error_bound: f64,
    pub inner_iterations: usize,
}

/// `T(z) = Mz + q` with `M + Mᵀ ⪰ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineOperator {
    m: Matrix,
    q: Vector,
}

impl AffineOperator {
    pub fn new(m: Matrix, q: Vector) -> Result<Self> {
        let n = q.len();
        ensure_square(&m, n)?;
        ensure_finite_mat(&m, "affine matrix")?;
        ensure_finite_vec(&q, "affine offset")?;
        let sym = (&m + m.transpose()) * 0.5;
        let (lmin, _) = symmetric_eigen_bounds(&sym);
        if lmin < -1e-10 * m.norm() {
            return Err(HippmError::NotMonotone(format!(
                "smallest eigenvalue of (M + Mᵀ)/2 is {lmin:e}"
            )));
        }
        Ok(Self { m, q })
    }

    pub fn matrix(&self) -> &Matrix {
        &self.m
    }

    pub fn offset(&self) -> &Vector {
        &self.q
    }
}

/// Normal cone of the box `[lower, upper]`; its resolvent is the clamp for every `c`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxNormalCone {
    lower: Vector,
    upper: Vector,
}

impl BoxNormalCone {
    pub fn new(lower: Vector, upper: Vector) -> Result<Self> {
        ensure_dim(lower.len(), upper.len())?;
        if lower.iter().chain(upper.iter()).any(|v| v.is_nan()) {
            return Err(HippmError::NonFinite("box bounds"));
        }
        if lower.iter().any(|&v| v == f64::INFINITY) || upper.iter().any(|&v| v == f64::NEG_INFINITY)
        {
            return Err(HippmError::invalid("box bound is empty"));
        }
        if lower.iter().zip(upper.iter()).any(|(lo, hi)| lo > hi) {
            return Err(HippmError::invalid("box has lower > upper"));
        }
        Ok(Self { lower, upper })
    }

    pub fn unbounded(n: usize) -> Self {
        Self {
            lower: Vector::from_element(n, f64::NEG_INFINITY),
            upper: Vector::from_element(n, f64::INFINITY),
        }
    }

    pub fn nonnegative(n: usize) -> Self {
        Self {
            lower: Vector::zeros(n),
            upper: Vector::from_element(n, f64::INFINITY),
        }
    }

    pub fn lower(&self) -> &Vector {
        &self.lower
    }

    pub fn upper(&self) -> &Vector {
        &self.upper
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn project(&self, y: &Vector) -> Vector {
        clamp_box(y, &self.lower, &self.upper)
    }

    pub fn contains(&self, x: &Vector) -> bool {
        x.iter()
            .zip(self.lower.iter().zip(self.upper.iter()))
            .all(|(v, (lo, hi))| lo <= v && v <= hi)
    }
}

/// `T(z) = μz + Sz` with `S` skew-symmetric; for `μ > 0`, `T⁻¹` is Lipschitz with modulus `1/μ`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledIdentityPlusSkew {
    mu: f64,
    s: Matrix,
}

impl ScaledIdentityPlusSkew {
    pub fn new(mu: f64, s: Matrix) -> Result<Self> {
        if !(mu.is_finite() && mu >= 0.0) {
            return Err(HippmError::invalid(format!("mu must be finite and ≥ 0, got {mu}")));
        }
        ensure_square(&s, s.nrows())?;
        ensure_finite_mat(&s, "skew matrix")?;
        if s != -s.transpose() {
            return Err(HippmError::invalid("S is not skew-symmetric"));
        }
        Ok(Self { mu, s })
    }

    /// Planar rotation generator `[[0, −1], [1, 0]]`.
    pub fn rotation(mu: f64) -> Self {
        Self {
            mu,
            s: Matrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]),
        }
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn skew(&self) -> &Matrix {
        &self.s
    }

    /// Modulus of Lipschitz continuity of `T⁻¹` at zero, when strongly monotone.
    pub fn inverse_lipschitz(&self) -> Option<f64> {
        (self.mu > 0.0).then(|| 1.0 / self.mu)
    }
}

/// Subdifferential of `½xᵀQx + qᵀx + ι_box(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticBoxSubdifferential {
    q_mat: Matrix,
    q: Vector,
    region: BoxNormalCone,
    lambda_min: f64,
    lambda_max: f64,
}

impl QuadraticBoxSubdifferential {
    pub fn new(q_mat: Matrix, q: Vector, region: BoxNormalCone) -> Result<Self> {
        let n = q.len();
        ensure_square(&q_mat, n)?;
        ensure_dim(n, region.dim())?;
        ensure_finite_mat(&q_mat, "quadratic matrix")?;
        ensure_finite_vec(&q, "linear term")?;
        let scale = q_mat.norm().max(1.0);
        if (&q_mat - q_mat.transpose()).amax() > 1e-12 * scale {
            return Err(HippmError::invalid("Q is not symmetric"));
        }
        let q_mat = (&q_mat + q_mat.transpose()) * 0.5;
        let (lmin, lmax) = symmetric_eigen_bounds(&q_mat);
        if lmin < -1e-10 * scale {
            return Err(HippmError::NotMonotone(format!(
                "Q has eigenvalue {lmin:e}"
            )));
        }
        Ok(Self {
            q_mat,
            q,
            region,
            lambda_min: lmin.max(0.0),
            lambda_max: lmax.max(0.0),
        })
    }

    pub fn quad(&self) -> &Matrix {
        &self.q_mat
    }

    pub fn linear(&self) -> &Vector {
        &self.q
    }

    pub fn region(&self) -> &BoxNormalCone {
        &self.region
    }

    pub fn eigen_bounds(&self) -> (f64, f64) {
        (self.lambda_min, self.lambda_max)
    }

    /// Inexact resolvent: minimize `½‖z − y‖² + c(½zᵀQz + qᵀz)` over the box.
    /// The objective is `(1 + cλ_min)`-strongly convex, so `‖G‖/(1 + cλ_min)` bounds the error.
    fn resolvent(&self, c: f64, y: &Vector, tol: f64) -> Result<ResolventResult> {
        if tol <= 0.0 {
            return Err(HippmError::ExactResolventUnavailable);
        }
        let n = y.len();
        let hess = Matrix::identity(n, n) + &self.q_mat * c;
        let prob = BoxQuadratic {
            hess: &hess,
            lin: &self.q * c - y,
            penalty: None,
            lower: self.region.lower(),
            upper: self.region.upper(),
            lipschitz: (1.0 + c * self.lambda_max) * (1.0 + 1e-12),
        };
        let strong = 1.0 + c * self.lambda_min;
        let out = prob.minimize(&self.region.project(y), tol * strong, INNER_MAX_ITER)?;
        Ok(ResolventResult {
            point: out.x,
            error_bound: out.grad_map_norm / strong,
            inner_iterations: out.iterations,
        })
    }

    /// Enumerate lower/upper/free patterns and keep KKT points.
    fn enumerate_minimizer(&self) -> Option<Vector> {
        let n = self.q.len();
        let lo = self.region.lower();
        let hi = self.region.upper();
        let scale = 1.0 + self.q_mat.norm() + self.q.norm();
        let mut best: Option<Vector> = None;
        let mut pattern = vec![0u8; n];
        loop {
            let feasible_pattern = pattern.iter().enumerate().all(|(j, &p)| match p {
                1 => lo[j].is_finite(),
                2 => hi[j].is_finite(),
                _ => true,
            });
            if feasible_pattern {
                if let Some(x) = self.solve_pattern(&pattern) {
                    let g = &self.q_mat * &x + &self.q;
                    let tol = 1e-10 * scale * (1.0 + x.norm());
                    let kkt = (0..n).all(|j| match pattern[j] {
                        0 => g[j].abs() <= tol && x[j] >= lo[j] - tol && x[j] <= hi[j] + tol,
                        1 => g[j] >= -tol,
                        _ => g[j] <= tol,
                    });
                    if kkt {
                        let x = self.region.project(&x);
                        if best.as_ref().map_or(true, |b| x.norm() < b.norm()) {
                            best = Some(x);
                        }
                    }
                }
            }
            // advance the base-3 counter
            let mut j = 0;
            loop {
                if j == n {
                    return best;
                }
                pattern[j] += 1;
                if pattern[j] < 3 {
                    break;
                }
                pattern[j] = 0;
                j += 1;
            }
        }
    }

    fn solve_pattern(&self, pattern: &[u8]) -> Option<Vector> {
        let n = pattern.len();
        let mut x = Vector::zeros(n);
        let free: Vec<usize> = (0..n).filter(|&j| pattern[j] == 0).collect();
        for j in 0..n {
            match pattern[j] {
                1 => x[j] = self.region.lower()[j],
                2 => x[j] = self.region.upper()[j],
                _ => {}
            }
        }
        if free.is_empty() {
            return Some(x);
        }
        let fixed_grad = &self.q_mat * &x + &self.q;
        let h = Matrix::from_fn(free.len(), free.len(), |r, s| self.q_mat[(free[r], free[s])]);
        let rhs = Vector::from_iterator(free.len(), free.iter().map(|&j| -fixed_grad[j]));
        let sol = h.lu().solve(&rhs)?;
        if !sol.iter().all(|v| v.is_finite()) {
            return None;
        }
        for (r, &j) in free.iter().enumerate() {
            x[j] = sol[r];
        }
        Some(x)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MonotoneOperator {
    Affine(AffineOperator),
    BoxNormalCone(BoxNormalCone),
    ScaledIdentityPlusSkew(ScaledIdentityPlusSkew),
    QuadraticBox(QuadraticBoxSubdifferential),
}

impl From<AffineOperator> for MonotoneOperator {
    fn from(op: AffineOperator) -> Self {
        MonotoneOperator::Affine(op)
    }
}

impl From<BoxNormalCone> for MonotoneOperator {
    fn from(op: BoxNormalCone) -> Self {
        MonotoneOperator::BoxNormalCone(op)
    }
}

impl From<ScaledIdentityPlusSkew> for MonotoneOperator {
    fn from(op: ScaledIdentityPlusSkew) -> Self {
        MonotoneOperator::ScaledIdentityPlusSkew(op)
    }
}

impl From<QuadraticBoxSubdifferential> for MonotoneOperator {
    fn from(op: QuadraticBoxSubdifferential) -> Self {
        MonotoneOperator::QuadraticBox(op)
    }
}

impl MonotoneOperator {
    pub fn dim(&self) -> usize {
        match self {
            MonotoneOperator::Affine(op) => op.q.len(),
            MonotoneOperator::BoxNormalCone(op) => op.dim(),
            MonotoneOperator::ScaledIdentityPlusSkew(op) => op.s.nrows(),
            MonotoneOperator::QuadraticBox(op) => op.q.len(),
        }
    }

    /// True when resolvents are computed in closed form (error bound 0).
    pub fn has_exact_resolvent(&self) -> bool {
        !matches!(self, MonotoneOperator::QuadraticBox(_))
    }

    pub fn family(&self) -> &'static str {
        match self {
            MonotoneOperator::Affine(_) => "affine",
            MonotoneOperator::BoxNormalCone(_) => "box_normal_cone",
            MonotoneOperator::ScaledIdentityPlusSkew(_) => "scaled_skew",
            MonotoneOperator::QuadraticBox(_) => "quadratic_box",
        }
    }

    /// Modulus `a` such that `T⁻¹` is Lipschitz at zero, when the catalog knows one.
    pub fn inverse_lipschitz(&self) -> Option<f64> {
        match self {
            MonotoneOperator::ScaledIdentityPlusSkew(op) => op.inverse_lipschitz(),
            _ => None,
        }
    }

    pub fn resolvent(&self, c: f64, y: &Vector, tol: f64) -> Result<ResolventResult> {
        self.resolver().eval(c, y, tol)
    }

    /// A resolvent evaluator that reuses the factorization of `I + cM` across calls with the same `c`.
    pub fn resolver(&self) -> Resolver<'_> {
        Resolver {
            op: self,
            cached: None,
        }
    }

    /// Returns an element of `T⁻¹(0)` when one is available in closed form.
    pub fn zero_point(&self) -> Option<Vector> {
        match self {
            MonotoneOperator::Affine(op) => {
                let rhs = -&op.q;
                let z = match op.m.clone().lu().solve(&rhs) {
                    Some(z) if z.iter().all(|v| v.is_finite()) => z,
                    _ => {
                        let svd = op.m.clone().svd(true, true);
                        let eps = 1e-12 * op.m.norm().max(1.0);
                        svd.solve(&rhs, eps).ok()?
                    }
                };
                let defect = (&op.m * &z + &op.q).norm();
                (defect <= 1e-9 * (1.0 + op.q.norm() + op.m.norm() * z.norm())).then_some(z)
            }
            MonotoneOperator::BoxNormalCone(op) => Some(op.project(&Vector::zeros(op.dim()))),
            MonotoneOperator::ScaledIdentityPlusSkew(op) => Some(Vector::zeros(op.s.nrows())),
            MonotoneOperator::QuadraticBox(op) => {
                if op.q.len() <= KKT_ENUMERATION_MAX_DIM {
                    op.enumerate_minimizer()
                } else if op.lambda_min > 0.0 {
                    let lo = op.region.lower();
                    let hi = op.region.upper();
                    let prob = BoxQuadratic {
                        hess: &op.q_mat,
                        lin: op.q.clone(),
                        penalty: None,
                        lower: lo,
                        upper: hi,
                        lipschitz: op.lambda_max * (1.0 + 1e-12),
                    };
                    let start = op.region.project(&Vector::zeros(op.q.len()));
                    prob.minimize(&start, 1e-14 * op.lambda_min, INNER_MAX_ITER)
                        .ok()
                        .map(|m| m.x)
                } else {
                    None
                }
            }
        }
    }
}

pub struct Resolver<'a> {
    op: &'a MonotoneOperator,
    cached: Option<(f64, LU<f64, nalgebra::Dyn, nalgebra::Dyn>)>,
}

impl Resolver<'_> {
    pub fn operator(&self) -> &MonotoneOperator {
        self.op
    }

    fn linear_solve(&mut self, c: f64, rhs: &Vector) -> Result<Vector> {
        let n = rhs.len();
        let stale = self.cached.as_ref().map_or(true, |(cc, _)| *cc != c);
        if stale {
            let system = match self.op {
                MonotoneOperator::Affine(op) => Matrix::identity(n, n) + &op.m * c,
                MonotoneOperator::ScaledIdentityPlusSkew(op) => {
                    Matrix::identity(n, n) * (1.0 + c * op.mu) + &op.s * c
                }
                _ => unreachable!("linear solve on a non-linear resolvent"),
            };
            self.cached = Some((c, system.lu()));
        }
        let (_, lu) = self.cached.as_ref().expect("factorization cached above");
        match lu.solve(rhs) {
            Some(z) if z.iter().all(|v| v.is_finite()) => Ok(z),
            _ => Err(HippmError::SingularSystem),
        }
    }

    pub fn eval(&mut self, c: f64, y: &Vector, tol: f64) -> Result<ResolventResult> {
        if !(c.is_finite() && c > 0.0) {
            return Err(HippmError::invalid(format!("proximal parameter must be > 0, got {c}")));
        }
        if tol.is_nan() || tol < 0.0 {
            return Err(HippmError::invalid(format!("tolerance must be ≥ 0, got {tol}")));
        }
        ensure_dim(self.op.dim(), y.len())?;
        ensure_finite_vec(y, "resolvent argument")?;
        let exact = |point| ResolventResult {
            point,
            error_bound: 0.0,
            inner_iterations: 0,
        };
        match self.op {
            MonotoneOperator::Affine(op) => {
                let rhs = y - &op.q * c;
                self.linear_solve(c, &rhs).map(exact)
            }
            MonotoneOperator::BoxNormalCone(op) => Ok(exact(op.project(y))),
            MonotoneOperator::ScaledIdentityPlusSkew(_) => self.linear_solve(c, y).map(exact),
            MonotoneOperator::QuadraticBox(op) => op.resolvent(c, y, tol),
        }
    }

    /// Resolvent at reference-grade accuracy.
    pub fn reference(&mut self, c: f64, z: &Vector) -> Result<ResolventResult> {
        self.eval(c, z, reference_tol(z))
    }
}

/// `‖z − P_c(z)‖` with `P_c` evaluated to `ref_tol`.
pub fn fixed_point_residual(op: &MonotoneOperator, c: f64, z: &Vector, ref_tol: f64) -> Result<f64> {
    if ref_tol > 1e-12 * (1.0 + z.norm()) {
        return Err(HippmError::invalid(format!(
            "reference tolerance {ref_tol:e} is not reference grade"
        )));
    }
    let r = op.resolvent(c, z, ref_tol)?;
    Ok((z - r.point).norm())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(xs: &[f64]) -> Vector {
        Vector::from_row_slice(xs)
    }

    #[test]
    fn affine_identity_halves() {
        let op: MonotoneOperator = AffineOperator::new(Matrix::identity(2, 2), Vector::zeros(2))
            .unwrap()
            .into();
        let r = op.resolvent(1.0, &v(&[2.0, 0.0]), 0.0).unwrap();
        assert_eq!(r.point, v(&[1.0, 0.0]));
        assert_eq!(r.error_bound, 0.0);
    }

    #[test]
    fn box_resolvent_is_clamp() {
        let op: MonotoneOperator = BoxNormalCone::nonnegative(2).into();
        for c in [0.1, 1.0, 37.0] {
            let r = op.resolvent(c, &v(&[-1.0, 2.0]), 0.0).unwrap();
            assert_eq!(r.point, v(&[0.0, 2.0]));
        }
    }

    #[test]
    fn quadratic_box_requires_positive_tolerance() {
        let op: MonotoneOperator = QuadraticBoxSubdifferential::new(
            Matrix::identity(2, 2),
            Vector::zeros(2),
            BoxNormalCone::nonnegative(2),
        )
        .unwrap()
        .into();
        assert_eq!(
            op.resolvent(1.0, &v(&[1.0, 1.0]), 0.0).unwrap_err(),
            HippmError::ExactResolventUnavailable
        );
    }

    #[test]
    fn quadratic_box_resolvent_matches_case_analysis() {
        // min ½‖z − y‖² + ½‖z‖² over z ≥ 0 at y = (−2, 4): z = (0, 2).
        let op: MonotoneOperator = QuadraticBoxSubdifferential::new(
            Matrix::identity(2, 2),
            Vector::zeros(2),
            BoxNormalCone::nonnegative(2),
        )
        .unwrap()
        .into();
        let tol = 1e-9;
        let r = op.resolvent(1.0, &v(&[-2.0, 4.0]), tol).unwrap();
        assert!(r.error_bound <= tol);
        assert!((&r.point - v(&[0.0, 2.0])).norm() <= tol);
    }

    #[test]
    fn rejects_non_monotone_affine() {
        let m = Matrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, 1.0]);
        assert!(matches!(
            AffineOperator::new(m, Vector::zeros(2)),
            Err(HippmError::NotMonotone(_))
        ));
    }

    #[test]
    fn rejects_non_skew() {
        let s = Matrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        assert!(ScaledIdentityPlusSkew::new(1.0, s).is_err());
    }

    #[test]
    fn rejects_inverted_box() {
        assert!(BoxNormalCone::new(v(&[1.0]), v(&[0.0])).is_err());
    }

    #[test]
    fn residual_examples() {
        let op: MonotoneOperator = AffineOperator::new(Matrix::identity(2, 2), Vector::zeros(2))
            .unwrap()
            .into();
        assert_eq!(fixed_point_residual(&op, 1.0, &Vector::zeros(2), 1e-13).unwrap(), 0.0);
        let r = fixed_point_residual(&op, 1.0, &v(&[2.0, 0.0]), 1e-13).unwrap();
        assert!((r - 1.0).abs() < 1e-15);
    }

    #[test]
    fn residual_rejects_loose_reference() {
        let op: MonotoneOperator = BoxNormalCone::nonnegative(1).into();
        assert!(fixed_point_residual(&op, 1.0, &v(&[1.0]), 1e-6).is_err());
    }

    #[test]
    fn zero_points() {
        let op: MonotoneOperator = AffineOperator::new(Matrix::identity(2, 2), v(&[-1.0, 0.0]))
            .unwrap()
            .into();
        assert_eq!(op.zero_point().unwrap(), v(&[1.0, 0.0]));
        let op: MonotoneOperator = ScaledIdentityPlusSkew::rotation(1.0).into();
        assert_eq!(op.zero_point().unwrap(), Vector::zeros(2));
    }

    #[test]
    fn zero_point_min_norm_for_singular_affine() {
        // M = diag(1, 0), q = (−1, 0): zeros are (1, t); min-norm is (1, 0).
        let m = Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let op: MonotoneOperator = AffineOperator::new(m, v(&[-1.0, 0.0])).unwrap().into();
        let z = op.zero_point().unwrap();
        assert!((z - v(&[1.0, 0.0])).norm() < 1e-12);
        // Inconsistent: q outside range(M).
        let m = Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let op: MonotoneOperator = AffineOperator::new(m, v(&[0.0, 1.0])).unwrap().into();
        assert!(op.zero_point().is_none());
    }

    #[test]
    fn resolver_cache_tracks_parameter() {
        let op: MonotoneOperator = ScaledIdentityPlusSkew::rotation(0.0).into();
        let mut res = op.resolver();
        let y = v(&[1.0, 0.0]);
        let a = res.eval(1.0, &y, 0.0).unwrap().point;
        let b = res.eval(2.0, &y, 0.0).unwrap().point;
        let b_fresh = op.resolvent(2.0, &y, 0.0).unwrap().point;
        assert_ne!(a, b);
        assert_eq!(b, b_fresh);
    }
}
