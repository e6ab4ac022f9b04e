//! Certified minimizer for box-constrained piecewise quadratics.
//!
//! Minimizes `f(x) = ½ xᵀHx + hᵀx + (1/2c)‖Π₊(y + c(Ax − b))‖²` over a box.
//! Every returned point is a projected-gradient step `x⁺ = Π(x − ∇f(x)/L)` and
//! comes with the gradient-mapping norm `‖G(x)‖ = L‖x − x⁺‖`, which callers turn
//! into distance or optimality-gap certificates through strong convexity.
//! Newton steps on the current active pieces are interleaved to finish quickly;
//! they never enter the certificate.

use crate::error::{HippmError, Result};
use crate::linalg::{clamp_box, Matrix, Vector};

pub(crate) struct Penalty<'a> {
    pub a: &'a Matrix,
    pub b: &'a Vector,
    pub y: &'a Vector,
    pub c: f64,
}

pub(crate) struct BoxQuadratic<'a> {
    pub hess: &'a Matrix,
    pub lin: Vector,
    pub penalty: Option<Penalty<'a>>,
    pub lower: &'a Vector,
    pub upper: &'a Vector,
    /// Lipschitz constant of the gradient.
    pub lipschitz: f64,
}

#[derive(Debug)]
pub(crate) struct Minimized {
    pub x: Vector,
    pub grad_map_norm: f64,
    pub iterations: usize,
}

const NEWTON_START: usize = 10;
const NEWTON_EVERY: usize = 5;

impl BoxQuadratic<'_> {
    fn shifted_constraints(&self, x: &Vector) -> Option<Vector> {
        self.penalty
            .as_ref()
            .map(|p| p.y + (p.a * x - p.b) * p.c)
    }

    pub fn value(&self, x: &Vector) -> f64 {
        let quad = 0.5 * x.dot(&(self.hess * x)) + self.lin.dot(x);
        match (&self.penalty, self.shifted_constraints(x)) {
            (Some(p), Some(s)) => {
                let pos: f64 = s.iter().map(|v| v.max(0.0).powi(2)).sum();
                quad + (pos - p.y.norm_squared()) / (2.0 * p.c)
            }
            _ => quad,
        }
    }

    pub fn gradient(&self, x: &Vector) -> Vector {
        let mut g = self.hess * x + &self.lin;
        if let (Some(p), Some(s)) = (&self.penalty, self.shifted_constraints(x)) {
            let pos = s.map(|v| v.max(0.0));
            g += p.a.tr_mul(&pos);
        }
        g
    }

    fn project(&self, x: &Vector) -> Vector {
        clamp_box(x, self.lower, self.upper)
    }

    /// Newton step on the active piece at `x`, followed by a projected backtracking search.
    fn newton_candidate(&self, x: &Vector, grad: &Vector, gm: f64) -> Option<Vector> {
        let n = x.len();
        let eps_active = (gm / self.lipschitz).min(1e-3);
        let free: Vec<usize> = (0..n)
            .filter(|&j| {
                let at_lower = x[j] - self.lower[j] <= eps_active && grad[j] > 0.0;
                let at_upper = self.upper[j] - x[j] <= eps_active && grad[j] < 0.0;
                !(at_lower || at_upper)
            })
            .collect();
        if free.is_empty() {
            return None;
        }
        let mut h = Matrix::zeros(free.len(), free.len());
        for (r, &i) in free.iter().enumerate() {
            for (s, &j) in free.iter().enumerate() {
                h[(r, s)] = self.hess[(i, j)];
            }
        }
        if let (Some(p), Some(shift)) = (&self.penalty, self.shifted_constraints(x)) {
            for (row, _) in shift.iter().enumerate().filter(|(_, v)| **v > 0.0) {
                for (r, &i) in free.iter().enumerate() {
                    for (s, &j) in free.iter().enumerate() {
                        h[(r, s)] += p.c * p.a[(row, i)] * p.a[(row, j)];
                    }
                }
            }
        }
        let rhs = Vector::from_iterator(free.len(), free.iter().map(|&j| -grad[j]));
        let step = match h.clone().cholesky() {
            Some(chol) => chol.solve(&rhs),
            None => h.lu().solve(&rhs)?,
        };
        if !step.iter().all(|v| v.is_finite()) {
            return None;
        }
        let f0 = self.value(x);
        let mut t = 1.0;
        for _ in 0..30 {
            let mut trial = x.clone();
            for (r, &j) in free.iter().enumerate() {
                trial[j] += t * step[r];
            }
            let trial = self.project(&trial);
            if self.value(&trial) < f0 {
                return Some(trial);
            }
            t *= 0.5;
        }
        None
    }

    /// Iterate until `‖G‖ ≤ target`. The returned point is the projected-gradient
    /// image of the last iterate, so `‖G‖` certifies it.
    pub fn minimize(&self, start: &Vector, target: f64, max_iter: usize) -> Result<Minimized> {
        let mut x = self.project(start);
        let mut last_gm = f64::INFINITY;
        for it in 0..max_iter {
            let grad = self.gradient(&x);
            let x_pg = self.project(&(&x - &grad / self.lipschitz));
            let gm = self.lipschitz * (&x - &x_pg).norm();
            if gm <= target {
                return Ok(Minimized {
                    x: x_pg,
                    grad_map_norm: gm,
                    iterations: it + 1,
                });
            }
            last_gm = gm;
            x = x_pg;
            if it >= NEWTON_START && it % NEWTON_EVERY == 0 {
                let g = self.gradient(&x);
                if let Some(cand) = self.newton_candidate(&x, &g, gm) {
                    x = cand;
                }
            }
        }
        Err(HippmError::InnerSolverStalled {
            iterations: max_iter,
            certificate: last_gm,
            target,
        })
    }
}
