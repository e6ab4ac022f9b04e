//! Accelerated inexact augmented Lagrangian method for
//! `min ½xᵀQx + qᵀx  s.t.  Ax − b ≤ 0,  x ∈ box`.
//!
//! Each outer step approximately minimizes `φₖ(x) = L(x, yᵏ, cₖ)` over the box to
//! gap `εₖ²/(2cₖ)`, sets `ȳᵏ = Π₊(yᵏ + cₖ(Axᵏ⁺¹ − b))` and anchors
//! `yᵏ⁺¹ = y⁰/(k+2) + (k+1)/(k+2)·ȳᵏ`.

use crate::error::{HippmError, Result};
use crate::inner::{BoxQuadratic, Penalty};
use crate::linalg::{
    anchored_combination, ensure_dim, ensure_finite_mat, ensure_finite_vec, ensure_square,
    symmetric_eigen_bounds, Matrix, Vector,
};
use crate::operator::{BoxNormalCone, INNER_MAX_ITER};
use crate::solver::eps_schedule;

#[derive(Debug, Clone, PartialEq)]
pub struct KnownSolution {
    pub x: Option<Vector>,
    pub y: Option<Vector>,
    pub optimum: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvexProgram {
    q_mat: Matrix,
    q: Vector,
    a: Matrix,
    b: Vector,
    region: BoxNormalCone,
    lambda_min: f64,
    lambda_max: f64,
    ata_max: f64,
    pub solution: Option<KnownSolution>,
}

impl ConvexProgram {
    pub fn new(q_mat: Matrix, q: Vector, a: Matrix, b: Vector, region: BoxNormalCone) -> Result<Self> {
        let n = q.len();
        ensure_square(&q_mat, n)?;
        ensure_dim(n, a.ncols())?;
        ensure_dim(a.nrows(), b.len())?;
        ensure_dim(n, region.dim())?;
        ensure_finite_mat(&q_mat, "objective Hessian")?;
        ensure_finite_vec(&q, "objective linear term")?;
        ensure_finite_mat(&a, "constraint matrix")?;
        ensure_finite_vec(&b, "constraint offset")?;
        let scale = q_mat.norm().max(1.0);
        if (&q_mat - q_mat.transpose()).amax() > 1e-12 * scale {
            return Err(HippmError::invalid("objective Hessian is not symmetric"));
        }
        let q_mat = (&q_mat + q_mat.transpose()) * 0.5;
        let (lmin, lmax) = symmetric_eigen_bounds(&q_mat);
        if lmin < -1e-10 * scale {
            return Err(HippmError::NotMonotone(format!(
                "objective Hessian has eigenvalue {lmin:e}"
            )));
        }
        let ata_max = symmetric_eigen_bounds(&a.tr_mul(&a)).1.max(0.0);
        Ok(Self {
            q_mat,
            q,
            a,
            b,
            region,
            lambda_min: lmin.max(0.0),
            lambda_max: lmax.max(0.0),
            ata_max,
            solution: None,
        })
    }

    pub fn with_solution(mut self, solution: KnownSolution) -> Result<Self> {
        if let Some(x) = &solution.x {
            ensure_dim(self.dim(), x.len())?;
        }
        if let Some(y) = &solution.y {
            ensure_dim(self.constraints(), y.len())?;
        }
        self.solution = Some(solution);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.q.len()
    }

    pub fn constraints(&self) -> usize {
        self.b.len()
    }

    pub fn quad(&self) -> &Matrix {
        &self.q_mat
    }

    pub fn linear(&self) -> &Vector {
        &self.q
    }

    pub fn constraint_matrix(&self) -> &Matrix {
        &self.a
    }

    pub fn constraint_offset(&self) -> &Vector {
        &self.b
    }

    pub fn region(&self) -> &BoxNormalCone {
        &self.region
    }

    pub fn strong_convexity(&self) -> f64 {
        self.lambda_min
    }

    pub fn objective(&self, x: &Vector) -> f64 {
        0.5 * x.dot(&(&self.q_mat * x)) + self.q.dot(x)
    }

    /// `F(x) = Ax − b`.
    pub fn constraint_values(&self, x: &Vector) -> Vector {
        &self.a * x - &self.b
    }

    /// `max_i f_i(x)`; `−∞` without constraints.
    pub fn max_violation(&self, x: &Vector) -> f64 {
        self.constraint_values(x)
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn optimum(&self) -> Option<f64> {
        self.solution.as_ref().and_then(|s| s.optimum)
    }

    fn inner_problem<'a>(&'a self, y: &'a Vector, c: f64) -> BoxQuadratic<'a> {
        BoxQuadratic {
            hess: &self.q_mat,
            lin: self.q.clone(),
            penalty: Some(Penalty {
                a: &self.a,
                b: &self.b,
                y,
                c,
            }),
            lower: self.region.lower(),
            upper: self.region.upper(),
            lipschitz: (self.lambda_max + c * self.ata_max) * (1.0 + 1e-12),
        }
    }
}

fn check_multiplier(y: &Vector, m: usize) -> Result<()> {
    ensure_dim(m, y.len())?;
    ensure_finite_vec(y, "multiplier")?;
    if y.iter().any(|v| *v < 0.0) {
        return Err(HippmError::invalid("multipliers must be nonnegative"));
    }
    Ok(())
}

fn check_c(c: f64) -> Result<()> {
    if c.is_finite() && c > 0.0 {
        Ok(())
    } else {
        Err(HippmError::invalid(format!("penalty parameter must be positive, got {c}")))
    }
}

/// `f₀(x) + (‖Π₊(y + cF(x))‖² − ‖y‖²)/(2c)`.
pub fn aug_lagrangian(x: &Vector, y: &Vector, c: f64, prog: &ConvexProgram) -> Result<f64> {
    ensure_dim(prog.dim(), x.len())?;
    check_multiplier(y, prog.constraints())?;
    check_c(c)?;
    let ybar = multiplier_map(x, y, c, prog)?;
    Ok(prog.objective(x) + (ybar.norm_squared() - y.norm_squared()) / (2.0 * c))
}

/// `Π₊(y + c(Ax − b))`.
pub fn multiplier_map(x: &Vector, y: &Vector, c: f64, prog: &ConvexProgram) -> Result<Vector> {
    ensure_dim(prog.dim(), x.len())?;
    ensure_dim(prog.constraints(), y.len())?;
    Ok((y + prog.constraint_values(x) * c).map(|v| v.max(0.0)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct InnerSolution {
    pub x: Vector,
    /// Certified upper bound on `φ(x) − inf φ` (certificate mode, or oracle mode with `Q ≻ 0`).
    pub gap_cert: Option<f64>,
    /// `φ(x)` at the returned point.
    pub phi: f64,
    /// Reported `inf φ` (oracle mode).
    pub inf_phi: Option<f64>,
    pub grad_map_norm: f64,
    pub iterations: usize,
}

/// Minimizes `φ(x) = L(x, y, c)` over the box, starting from `start`.
///
/// Certificate mode stops once `‖G‖²/(2λ_min(Q)) ≤ gap_target`. Oracle mode runs to
/// `‖G‖ ≤ oracle_tol·(1 + ‖x‖)` and reports `φ` there as `inf φ`.
pub fn inner_solve(
    prog: &ConvexProgram,
    y: &Vector,
    c: f64,
    start: &Vector,
    gap_target: f64,
    oracle_mode: bool,
    oracle_tol: f64,
) -> Result<InnerSolution> {
    check_multiplier(y, prog.constraints())?;
    check_c(c)?;
    ensure_dim(prog.dim(), start.len())?;
    let mu = prog.lambda_min;
    let problem = prog.inner_problem(y, c);
    if oracle_mode {
        let target = oracle_tol * (1.0 + start.norm());
        let out = problem.minimize(start, target, INNER_MAX_ITER)?;
        let phi = problem.value(&out.x);
        return Ok(InnerSolution {
            gap_cert: (mu > 0.0).then(|| out.grad_map_norm.powi(2) / (2.0 * mu)),
            phi,
            inf_phi: Some(phi),
            grad_map_norm: out.grad_map_norm,
            iterations: out.iterations,
            x: out.x,
        });
    }
    if mu <= 0.0 {
        return Err(HippmError::CertificateUnavailable);
    }
    if !(gap_target > 0.0) {
        return Err(HippmError::invalid("gap target must be positive"));
    }
    let out = problem.minimize(start, (2.0 * mu * gap_target).sqrt(), INNER_MAX_ITER)?;
    Ok(InnerSolution {
        gap_cert: Some(out.grad_map_norm.powi(2) / (2.0 * mu)),
        phi: problem.value(&out.x),
        inf_phi: None,
        grad_map_norm: out.grad_map_norm,
        iterations: out.iterations,
        x: out.x,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AlmSchedule {
    Constant(f64),
    /// `cₖ = c₀(k+1)`
    LinearGrowth(f64),
}

impl AlmSchedule {
    pub fn c0(&self) -> f64 {
        match *self {
            AlmSchedule::Constant(c) | AlmSchedule::LinearGrowth(c) => c,
        }
    }

    pub fn value(&self, k: usize) -> f64 {
        match *self {
            AlmSchedule::Constant(c) => c,
            AlmSchedule::LinearGrowth(c) => c * (k + 1) as f64,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            AlmSchedule::Constant(_) => "constant",
            AlmSchedule::LinearGrowth(_) => "linear",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ALMConfig {
    pub y0: Vector,
    pub schedule: AlmSchedule,
    pub delta: f64,
    pub max_outer: usize,
    /// Relative `‖G‖` target of oracle-mode inner solves.
    pub inner_oracle_tol: f64,
    /// Solve to oracle accuracy instead of the certified gap target.
    pub oracle_mode: bool,
    /// Measure `‖ȳᵏ − P_{cₖ}g(yᵏ)‖` against an oracle-mode reference every step.
    pub track_dual_error: bool,
}

impl ALMConfig {
    pub fn new(y0: Vector, schedule: AlmSchedule) -> Self {
        Self {
            y0,
            schedule,
            delta: 1.0,
            max_outer: 1000,
            inner_oracle_tol: 1e-13,
            oracle_mode: false,
            track_dual_error: false,
        }
    }

    fn validate(&self, prog: &ConvexProgram) -> Result<()> {
        check_multiplier(&self.y0, prog.constraints())?;
        check_c(self.schedule.c0())?;
        eps_schedule(self.delta, 0)?;
        if self.max_outer == 0 {
            return Err(HippmError::invalid("max_outer must be ≥ 1"));
        }
        if !(self.inner_oracle_tol > 0.0) {
            return Err(HippmError::invalid("inner_oracle_tol must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ALMRow {
    pub k: usize,
    pub c: f64,
    pub eps: f64,
    /// `yᵏ`
    pub y: Vector,
    /// `ȳᵏ`
    pub ybar: Vector,
    /// `xᵏ⁺¹`
    pub x: Vector,
    /// `yᵏ⁺¹`
    pub y_next: Vector,
    /// `x̃ᵏ⁺¹`, weighted average of `x¹..xᵏ⁺¹`.
    pub xtilde: Vector,
    /// `max_i f_i(x̃ᵏ⁺¹)`
    pub feas_max: f64,
    /// `max_i f_i(xᵏ⁺¹)`
    pub feas_max_point: f64,
    /// `f₀(x̃ᵏ⁺¹) − optimum`
    pub obj_gap: Option<f64>,
    /// `f₀(xᵏ⁺¹) − optimum`
    pub obj_gap_point: Option<f64>,
    pub gap_cert: Option<f64>,
    pub inner_iterations: usize,
    /// `max_{j ≤ k+1} ‖yʲ‖`
    pub delta0_running: f64,
    /// `‖ȳᵏ − P_{cₖ}g(yᵏ)‖` and the accuracy of the reference.
    pub dual_error: Option<(f64, f64)>,
}

impl ALMRow {
    pub fn criterion_ok(&self) -> bool {
        match self.gap_cert {
            Some(g) => g <= self.eps * self.eps / (2.0 * self.c),
            None => true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ALMTrace {
    pub y0: Vector,
    pub schedule: AlmSchedule,
    pub delta: f64,
    pub rows: Vec<ALMRow>,
    /// Set when an inner solve aborted; rows hold the completed prefix.
    pub aborted: Option<HippmError>,
}

impl ALMTrace {
    /// Ex-post `Δ₀`: 10% headroom over the largest multiplier norm seen.
    pub fn delta0(&self) -> f64 {
        let seen = self
            .rows
            .last()
            .map_or(self.y0.norm(), |r| r.delta0_running);
        1.1 * seen
    }
}

/// `x̃ᵏ = Σ_{j=1}^k wⱼxʲ`, `wⱼ = c_{j−1}/Σ_{l=1}^k c_{l−1}`, with `xs[j−1] = xʲ`, `cs[j−1] = c_{j−1}`.
pub fn ergodic_average(xs: &[Vector], cs: &[f64], k: usize) -> Result<Vector> {
    if k == 0 || xs.len() < k || cs.len() < k {
        return Err(HippmError::MissingData(format!(
            "ergodic average over {k} points needs that many iterates and parameters"
        )));
    }
    let total: f64 = cs[..k].iter().sum();
    let mut out = Vector::zeros(xs[0].len());
    for (x, &c) in xs[..k].iter().zip(&cs[..k]) {
        ensure_dim(out.len(), x.len())?;
        out += x * (c / total);
    }
    Ok(out)
}

pub fn run_alm(prog: &ConvexProgram, config: &ALMConfig) -> Result<ALMTrace> {
    config.validate(prog)?;
    let mut rows: Vec<ALMRow> = Vec::with_capacity(config.max_outer.min(1 << 20));
    let y0 = &config.y0;
    let mut y = y0.clone();
    let mut x = prog.region().project(&Vector::zeros(prog.dim()));
    let mut xtilde = Vector::zeros(prog.dim());
    let mut c_sum = 0.0;
    let mut running = y0.norm();
    let mut aborted = None;

    for k in 0..config.max_outer {
        let c = config.schedule.value(k);
        let eps = eps_schedule(config.delta, k)?;
        let gap_target = eps * eps / (2.0 * c);
        let sol = match inner_solve(
            prog,
            &y,
            c,
            &x,
            gap_target,
            config.oracle_mode,
            config.inner_oracle_tol,
        ) {
            Ok(s) => s,
            Err(e @ HippmError::InnerSolverStalled { .. }) => {
                aborted = Some(e);
                break;
            }
            Err(e) => return Err(e),
        };
        x = sol.x;
        let ybar = multiplier_map(&x, &y, c, prog)?;
        let dual_error = if config.track_dual_error {
            let reference = inner_solve(prog, &y, c, &x, gap_target, true, config.inner_oracle_tol)?;
            let y_ref = multiplier_map(&reference.x, &y, c, prog)?;
            // ‖Π₊(·) difference‖ ≤ c‖A‖‖x_ref − x*‖ ≤ c‖A‖‖G‖/λ_min
            let ref_acc = if prog.lambda_min > 0.0 {
                c * prog.ata_max.sqrt() * reference.grad_map_norm / prog.lambda_min
            } else {
                f64::INFINITY
            };
            Some(((&ybar - y_ref).norm(), ref_acc))
        } else {
            None
        };
        let y_next = anchored_combination(y0, &ybar, k);
        c_sum += c;
        xtilde += (&x - &xtilde) * (c / c_sum);
        running = running.max(y_next.norm());
        let optimum = prog.optimum();
        rows.push(ALMRow {
            k,
            c,
            eps,
            feas_max: prog.max_violation(&xtilde),
            feas_max_point: prog.max_violation(&x),
            obj_gap: optimum.map(|o| prog.objective(&xtilde) - o),
            obj_gap_point: optimum.map(|o| prog.objective(&x) - o),
            gap_cert: sol.gap_cert,
            inner_iterations: sol.iterations,
            delta0_running: running,
            dual_error,
            y: std::mem::replace(&mut y, y_next.clone()),
            ybar,
            x: x.clone(),
            y_next,
            xtilde: xtilde.clone(),
        });
    }

    Ok(ALMTrace {
        y0: y0.clone(),
        schedule: config.schedule,
        delta: config.delta,
        rows,
        aborted,
    })
}

/// Pointwise bounds at outer step `k`, for `f_i(xᵏ⁺¹)` and `f₀(xᵏ⁺¹) − optimum`.
pub fn thm41_bounds(trace: &ALMTrace, k: usize) -> Result<(Vector, f64)> {
    let row = trace
        .rows
        .get(k)
        .ok_or_else(|| HippmError::MissingData(format!("no outer step {k} in trace")))?;
    let kf = k as f64;
    let y0 = &trace.y0;
    let feas = (&row.y_next - &row.y + (&row.y_next - y0) / (kf + 1.0)) / row.c;
    let inner = (&row.y_next - y0).dot(&(&row.y_next - y0 / (2.0 * kf + 3.0)));
    let obj = (row.eps * row.eps + row.y.norm_squared() - row.y_next.norm_squared()
        - (2.0 * kf + 3.0) / (kf + 1.0).powi(2) * inner)
        / (2.0 * row.c);
    Ok((feas, obj))
}

/// Ergodic bounds on `max_i f_i(x̃ᵏ)` and `f₀(x̃ᵏ) − optimum`, `k ≥ 2`.
pub fn thm42_bounds(delta0: f64, delta: f64, c0: f64, schedule: AlmSchedule, k: usize) -> Result<(f64, f64)> {
    if k < 2 {
        return Err(HippmError::invalid("ergodic bounds need k ≥ 2"));
    }
    let kf = k as f64;
    let ln = kf.ln();
    let feas_core = 3.0 * delta0 + 2.0 * ln;
    let obj_core = 2.0 * (1.0 + delta) / (1.0 + 2.0 * delta)
        + 13.0 * delta0 * delta0
        + 12.0 * delta0 * delta0 * ln;
    Ok(match schedule {
        AlmSchedule::Constant(_) => (feas_core / (c0 * kf), obj_core / (2.0 * c0 * kf)),
        AlmSchedule::LinearGrowth(_) => (
            2.0 * feas_core / (c0 * kf * (kf + 1.0)),
            obj_core / (c0 * kf * (kf + 1.0)),
        ),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn canonical() -> ConvexProgram {
        ConvexProgram::new(
            Matrix::identity(2, 2),
            Vector::zeros(2),
            Matrix::from_row_slice(1, 2, &[-1.0, 0.0]),
            Vector::from_element(1, -1.0),
            BoxNormalCone::unbounded(2),
        )
        .unwrap()
    }

    fn scalar_prog() -> ConvexProgram {
        ConvexProgram::new(
            Matrix::from_element(1, 1, 1.0),
            Vector::zeros(1),
            Matrix::from_element(1, 1, -1.0),
            Vector::from_element(1, -1.0),
            BoxNormalCone::unbounded(1),
        )
        .unwrap()
    }

    #[test]
    fn lagrangian_examples() {
        let p = scalar_prog();
        let l = aug_lagrangian(&Vector::zeros(1), &Vector::from_element(1, 1.0), 1.0, &p).unwrap();
        assert!((l - 1.5).abs() < 1e-15);
        // strictly feasible with y + cF ≤ 0
        let l = aug_lagrangian(&Vector::from_element(1, 3.0), &Vector::from_element(1, 1.0), 1.0, &p).unwrap();
        assert!((l - (4.5 - 0.5)).abs() < 1e-15);
        assert!(aug_lagrangian(&Vector::zeros(1), &Vector::from_element(1, -1.0), 1.0, &p).is_err());
    }

    #[test]
    fn multiplier_map_examples() {
        // F(x) = 1 − x
        let p = scalar_prog();
        let m = |x: f64, y: f64, c: f64| {
            multiplier_map(&Vector::from_element(1, x), &Vector::from_element(1, y), c, &p).unwrap()[0]
        };
        assert_eq!(m(4.0, 1.0, 1.0), 0.0);
        assert_eq!(m(1.0, 0.7, 3.0), 0.7);
        assert_eq!(m(-1.0, 0.5, 2.0), 4.5);
    }

    #[test]
    fn inner_scalar_oracle() {
        let p = scalar_prog();
        let s = inner_solve(&p, &Vector::zeros(1), 1.0, &Vector::zeros(1), 1e-20, false, 1e-13).unwrap();
        assert!((s.x[0] - 0.5).abs() < 1e-9);
        let o = inner_solve(&p, &Vector::zeros(1), 1.0, &Vector::zeros(1), 1e-20, true, 1e-13).unwrap();
        assert!((o.inf_phi.unwrap() - 0.25).abs() < 1e-13);
    }

    #[test]
    fn certificate_requires_strong_convexity() {
        let p = ConvexProgram::new(
            Matrix::zeros(1, 1),
            Vector::from_element(1, 1.0),
            Matrix::from_element(1, 1, -1.0),
            Vector::zeros(1),
            BoxNormalCone::unbounded(1),
        )
        .unwrap();
        let err = inner_solve(&p, &Vector::zeros(1), 1.0, &Vector::zeros(1), 1e-4, false, 1e-13).unwrap_err();
        assert_eq!(err, HippmError::CertificateUnavailable);
    }

    #[test]
    fn ergodic_weights() {
        let xs = vec![Vector::from_element(1, 0.0), Vector::from_element(1, 2.0)];
        assert_eq!(ergodic_average(&xs, &[1.0, 1.0], 2).unwrap()[0], 1.0);
        let xs: Vec<Vector> = (0..3).map(|i| Vector::from_element(3, 0.0).map(|_| 0.0) + Vector::from_fn(3, |r, _| if r == i { 1.0 } else { 0.0 })).collect();
        let avg = ergodic_average(&xs, &[1.0, 2.0, 3.0], 3).unwrap();
        assert!((avg - Vector::from_row_slice(&[1.0 / 6.0, 2.0 / 6.0, 3.0 / 6.0])).norm() < 1e-15);
        assert!(ergodic_average(&xs, &[1.0], 2).is_err());
    }

    #[test]
    fn thm42_values() {
        let (f, o) = thm42_bounds(1.0, 1.0, 1.0, AlmSchedule::Constant(1.0), 8).unwrap();
        assert!((f - (3.0 + 2.0 * 8f64.ln()) / 8.0).abs() < 1e-15);
        assert!((o - (4.0 / 3.0 + 13.0 + 12.0 * 8f64.ln()) / 16.0).abs() < 1e-14);
        assert!(thm42_bounds(1.0, 1.0, 1.0, AlmSchedule::Constant(1.0), 1).is_err());
    }

    #[test]
    fn canonical_short_run_is_nonnegative() {
        let p = canonical();
        let mut cfg = ALMConfig::new(Vector::zeros(1), AlmSchedule::Constant(1.0));
        cfg.max_outer = 50;
        let t = run_alm(&p, &cfg).unwrap();
        assert!(t.aborted.is_none());
        for r in &t.rows {
            assert!(r.y.iter().chain(r.ybar.iter()).all(|v| *v >= 0.0));
            assert!(r.criterion_ok());
        }
        assert!(t.rows.windows(2).all(|w| w[1].delta0_running >= w[0].delta0_running));
    }
}
