//! Halpern-accelerated inexact proximal point iteration and the classical
//! inexact proximal point baseline.
//!
//! One outer step computes `z̄ᵏ ≈ P_{cₖ}(zᵏ)` under criterion (A) or (B) and then
//! either anchors, `zᵏ⁺¹ = z⁰/(k+2) + (k+1)/(k+2)·z̄ᵏ`, or (classical) sets
//! `zᵏ⁺¹ = z̄ᵏ`. Every row of the resulting [`IterateTrace`] carries the certified
//! error bound, the reference residual and, when stored, the reference
//! resolvent value, which is what the bound checks in [`crate::rates`] consume.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{HippmError, Result};
use crate::linalg::{anchored_combination, ensure_dim, ensure_finite_vec, reference_tol, Vector};
use crate::operator::{MonotoneOperator, Resolver};

/// Maximum number of tolerance halvings when enforcing criterion (B).
pub const CRITERION_B_MAX_HALVINGS: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Criterion {
    /// `‖z̄ᵏ − P(zᵏ)‖ ≤ εₖ`
    A,
    /// `‖z̄ᵏ − P(zᵏ)‖ ≤ δₖ‖z̄ᵏ − zᵏ‖`
    B,
}

/// `1/(k+2)^{1+δ}`.
pub fn eps_schedule(delta: f64, k: usize) -> Result<f64> {
    if !(delta.is_finite() && delta > 0.0) {
        return Err(HippmError::InvalidSchedule(format!(
            "tolerance exponent must be > 0, got {delta}"
        )));
    }
    Ok(((k + 2) as f64).powf(-(1.0 + delta)))
}

/// Inexactness sequence `εₖ` (criterion A) or `δₖ` (criterion B).
#[derive(Debug, Clone, PartialEq)]
pub struct ToleranceSchedule {
    pub kind: Criterion,
    pub delta_exponent: f64,
    pub sequence: Option<Vec<f64>>,
}

impl ToleranceSchedule {
    pub fn new(kind: Criterion, delta_exponent: f64) -> Result<Self> {
        eps_schedule(delta_exponent, 0)?;
        Ok(Self {
            kind,
            delta_exponent,
            sequence: None,
        })
    }

    /// Explicit sequence; must be positive and nonincreasing. `delta_exponent` is kept
    /// only as metadata.
    pub fn with_sequence(kind: Criterion, delta_exponent: f64, sequence: Vec<f64>) -> Result<Self> {
        let mut sched = Self::new(kind, delta_exponent)?;
        if sequence.is_empty() {
            return Err(HippmError::InvalidSchedule("empty override sequence".into()));
        }
        if sequence.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(HippmError::InvalidSchedule(
                "override entries must be positive and finite".into(),
            ));
        }
        if sequence.windows(2).any(|w| w[1] > w[0]) {
            return Err(HippmError::InvalidSchedule(
                "override sequence must be nonincreasing".into(),
            ));
        }
        sched.sequence = Some(sequence);
        Ok(sched)
    }

    pub fn value(&self, k: usize) -> Result<f64> {
        match &self.sequence {
            Some(seq) => seq.get(k).copied().ok_or_else(|| {
                HippmError::InvalidSchedule(format!("override sequence has no entry for k = {k}"))
            }),
            None => eps_schedule(self.delta_exponent, k),
        }
    }

    /// Upper bound on `Σ_{j ≥ k} εⱼ` for the generated rule: `1/(δ·(k+1)^δ)`.
    pub fn tail_bound(&self, k: usize) -> f64 {
        let d = self.delta_exponent;
        1.0 / (d * ((k + 1) as f64).powf(d))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProxParamSchedule {
    Constant(f64),
    /// `min(c₀·growthᵏ, cap)`
    Geometric { c0: f64, growth: f64, cap: f64 },
    /// `c₀(k+1)`
    LinearGrowth(f64),
}

impl ProxParamSchedule {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            ProxParamSchedule::Constant(c) | ProxParamSchedule::LinearGrowth(c) => {
                c.is_finite() && c > 0.0
            }
            ProxParamSchedule::Geometric { c0, growth, cap } => {
                c0.is_finite() && c0 > 0.0 && growth.is_finite() && growth >= 1.0 && cap.is_finite() && cap >= c0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(HippmError::InvalidSchedule(format!("invalid proximal schedule {self:?}")))
        }
    }

    pub fn value(&self, k: usize) -> f64 {
        match *self {
            ProxParamSchedule::Constant(c) => c,
            ProxParamSchedule::Geometric { c0, growth, cap } => {
                (c0 * growth.powf(k as f64)).min(cap)
            }
            ProxParamSchedule::LinearGrowth(c0) => c0 * (k + 1) as f64,
        }
    }

    pub fn constant_value(&self) -> Option<f64> {
        match *self {
            ProxParamSchedule::Constant(c) => Some(c),
            ProxParamSchedule::Geometric { c0, growth, .. } if growth == 1.0 => Some(c0),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Halpern,
    Classical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorMode {
    /// Whatever the resolvent oracle produces at the requested tolerance.
    Natural,
    /// Reference resolvent plus an error of the full allowed size in a seeded random direction.
    AdversarialFullBudget { seed: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveConfig {
    pub anchor: Vector,
    pub max_iter: usize,
    pub stop_residual: f64,
    pub method: Method,
    pub prox_schedule: ProxParamSchedule,
    pub tolerance: ToleranceSchedule,
    pub error_mode: ErrorMode,
    /// Reference residual is evaluated every `residual_stride` iterations.
    pub residual_stride: usize,
    /// Keep the reference resolvent value `P_{cₖ}(zᵏ)` in each row (needed for `ηᵏ`).
    pub store_reference: bool,
}

impl SolveConfig {
    pub fn new(anchor: Vector) -> Self {
        Self {
            anchor,
            max_iter: 1000,
            stop_residual: 0.0,
            method: Method::Halpern,
            prox_schedule: ProxParamSchedule::Constant(1.0),
            tolerance: ToleranceSchedule {
                kind: Criterion::A,
                delta_exponent: 1.0,
                sequence: None,
            },
            error_mode: ErrorMode::Natural,
            residual_stride: 1,
            store_reference: true,
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        ensure_dim(dim, self.anchor.len())?;
        ensure_finite_vec(&self.anchor, "anchor")?;
        if self.max_iter == 0 {
            return Err(HippmError::invalid("max_iter must be ≥ 1"));
        }
        if !(self.stop_residual >= 0.0) {
            return Err(HippmError::invalid("stop_residual must be ≥ 0"));
        }
        if self.residual_stride == 0 {
            return Err(HippmError::invalid("residual_stride must be ≥ 1"));
        }
        self.prox_schedule.validate()?;
        eps_schedule(self.tolerance.delta_exponent, 0)?;
        if let Some(seq) = &self.tolerance.sequence {
            if seq.len() < self.max_iter {
                return Err(HippmError::InvalidSchedule(format!(
                    "override sequence has {} entries, need {}",
                    seq.len(),
                    self.max_iter
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub k: usize,
    pub z: Vector,
    pub zbar: Vector,
    /// Certified bound on `‖ηᵏ‖ = ‖z̄ᵏ − P_{cₖ}(zᵏ)‖`.
    pub eps_used: f64,
    /// Scheduled `εₖ` (criterion A) or `δₖ` (criterion B).
    pub tolerance: f64,
    /// `‖zᵏ − P_{cₖ}(zᵏ)‖` through the reference resolvent.
    pub residual: Option<f64>,
    pub reference_point: Option<Vector>,
    pub dist_to_star: Option<f64>,
    pub c: f64,
    pub inner_iterations: usize,
    pub criterion_ok: bool,
}

impl TraceRow {
    /// `ηᵏ = z̄ᵏ − P_{cₖ}(zᵏ)` (reference resolvent), when stored.
    pub fn eta(&self) -> Option<Vector> {
        self.reference_point.as_ref().map(|p| &self.zbar - p)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterateTrace {
    pub anchor: Vector,
    pub zstar: Option<Vector>,
    pub method: Method,
    pub criterion: Criterion,
    pub delta_exponent: f64,
    pub rows: Vec<TraceRow>,
    pub stopped_early: bool,
}

impl IterateTrace {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// `‖z⁰ − z*‖` when a zero is known.
    pub fn dist0(&self) -> Option<f64> {
        self.zstar.as_ref().map(|zs| (&self.anchor - zs).norm())
    }

    pub fn residuals(&self) -> Vec<Option<f64>> {
        self.rows.iter().map(|r| r.residual).collect()
    }

    /// The common proximal parameter when every row used the same one.
    pub fn constant_c(&self) -> Option<f64> {
        let first = self.rows.first()?.c;
        self.rows.iter().all(|r| r.c == first).then_some(first)
    }
}

/// `z⁰/(k+2) + (k+1)/(k+2)·z̄ᵏ`.
pub fn halpern_step(z0: &Vector, zbar: &Vector, k: usize) -> Result<Vector> {
    ensure_dim(z0.len(), zbar.len())?;
    Ok(anchored_combination(z0, zbar, k))
}

/// `z + budget·u` with `u` a unit vector drawn deterministically from `seed`.
pub fn inject_adversarial_error(z_exact: &Vector, budget: f64, seed: u64) -> Vector {
    if budget == 0.0 || z_exact.is_empty() {
        return z_exact.clone();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = z_exact.len();
    let dir = loop {
        let u = Vector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
        let norm = u.norm();
        if norm > 1e-3 {
            break u / norm;
        }
    };
    z_exact + dir * budget
}

/// Per-iteration direction seed.
fn iteration_seed(seed: u64, k: usize) -> u64 {
    // splitmix64 finalizer
    let mut x = seed ^ (k as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

struct Step {
    zbar: Vector,
    eps_used: f64,
    inner_iterations: usize,
}

fn criterion_b_natural(
    resolver: &mut Resolver<'_>,
    c: f64,
    z: &Vector,
    delta_k: f64,
    k: usize,
) -> Result<Step> {
    let mut tol = delta_k * (1.0 + z.norm());
    let mut inner = 0;
    for _ in 0..=CRITERION_B_MAX_HALVINGS {
        let r = resolver.eval(c, z, tol)?;
        inner += r.inner_iterations;
        if r.error_bound <= delta_k * (&r.point - z).norm() {
            return Ok(Step {
                zbar: r.point,
                eps_used: r.error_bound,
                inner_iterations: inner,
            });
        }
        tol *= 0.5;
    }
    Err(HippmError::CriterionBUnattainable { k })
}

pub fn run_hippm(op: &MonotoneOperator, config: &SolveConfig) -> Result<IterateTrace> {
    config.validate(op.dim())?;
    let zstar = op.zero_point();
    let mut resolver = op.resolver();
    let anchor = &config.anchor;
    let adversarial_seed = match config.error_mode {
        ErrorMode::AdversarialFullBudget { seed } => Some(seed),
        ErrorMode::Natural => None,
    };
    let mut rows = Vec::with_capacity(config.max_iter.min(1 << 20));
    let mut stopped_early = false;
    let mut z = anchor.clone();

    for k in 0..config.max_iter {
        let c = config.prox_schedule.value(k);
        let tol_k = config.tolerance.value(k)?;
        let want_residual = k % config.residual_stride == 0;
        let reference = if want_residual || adversarial_seed.is_some() {
            Some(resolver.reference(c, &z)?)
        } else {
            None
        };
        let residual = if want_residual {
            reference.as_ref().map(|r| (&z - &r.point).norm())
        } else {
            None
        };

        let step = match (config.tolerance.kind, adversarial_seed) {
            (Criterion::A, None) => {
                let r = resolver.eval(c, &z, tol_k)?;
                Step {
                    zbar: r.point,
                    eps_used: r.error_bound,
                    inner_iterations: r.inner_iterations,
                }
            }
            (Criterion::A, Some(seed)) => {
                let r = reference.as_ref().expect("reference computed in adversarial mode");
                let budget = (tol_k - r.error_bound).max(0.0);
                Step {
                    zbar: inject_adversarial_error(&r.point, budget, iteration_seed(seed, k)),
                    eps_used: budget + r.error_bound,
                    inner_iterations: r.inner_iterations,
                }
            }
            (Criterion::B, None) => match criterion_b_natural(&mut resolver, c, &z, tol_k, k) {
                Ok(step) => step,
                Err(HippmError::CriterionBUnattainable { .. })
                    if residual.is_some_and(|r| r <= config.stop_residual) =>
                {
                    // zᵏ is already a fixed point to within the stopping threshold.
                    let r = reference.as_ref().expect("residual implies reference");
                    rows.push(TraceRow {
                        k,
                        z: z.clone(),
                        zbar: r.point.clone(),
                        eps_used: r.error_bound,
                        tolerance: tol_k,
                        residual,
                        reference_point: config.store_reference.then(|| r.point.clone()),
                        dist_to_star: zstar.as_ref().map(|zs| (&z - zs).norm()),
                        c,
                        inner_iterations: r.inner_iterations,
                        criterion_ok: true,
                    });
                    stopped_early = true;
                    break;
                }
                Err(e) => return Err(e),
            },
            (Criterion::B, Some(seed)) => {
                let r = reference.as_ref().expect("reference computed in adversarial mode");
                let gap = (&r.point - &z).norm();
                let budget = ((tol_k * gap - r.error_bound) / (1.0 + tol_k)).max(0.0);
                Step {
                    zbar: inject_adversarial_error(&r.point, budget, iteration_seed(seed, k)),
                    eps_used: budget + r.error_bound,
                    inner_iterations: r.inner_iterations,
                }
            }
        };

        let criterion_ok = match config.tolerance.kind {
            Criterion::A => step.eps_used <= tol_k,
            Criterion::B => {
                step.eps_used <= tol_k * (&step.zbar - &z).norm() + reference_tol(&z)
            }
        };

        let next = match config.method {
            Method::Halpern => anchored_combination(anchor, &step.zbar, k),
            Method::Classical => step.zbar.clone(),
        };

        rows.push(TraceRow {
            k,
            z: std::mem::replace(&mut z, next),
            zbar: step.zbar,
            eps_used: step.eps_used,
            tolerance: tol_k,
            residual,
            reference_point: if config.store_reference {
                reference.map(|r| r.point)
            } else {
                None
            },
            dist_to_star: None,
            c,
            inner_iterations: step.inner_iterations,
            criterion_ok,
        });
        let row = rows.last_mut().expect("row just pushed");
        row.dist_to_star = zstar.as_ref().map(|zs| (&row.z - zs).norm());

        if residual.is_some_and(|r| r <= config.stop_residual) {
            stopped_early = true;
            break;
        }
    }

    Ok(IterateTrace {
        anchor: anchor.clone(),
        zstar,
        method: config.method,
        criterion: config.tolerance.kind,
        delta_exponent: config.tolerance.delta_exponent,
        rows,
        stopped_early,
    })
}
