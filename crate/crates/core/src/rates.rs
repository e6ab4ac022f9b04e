//! Computable convergence bounds for the anchored iteration and their checks
//! against recorded traces.
//!
//! With `εₖ = 1/(k+2)^{1+δ}`, `β₀ = Σ εₖ`, `κ₀ = 2(β₀ + ‖z⁰ − z*‖)` and constant `c`:
//!
//! ```text
//! ‖zᵏ − P_c(zᵏ)‖² ≤ 4‖z⁰ − z*‖²/(k+1)² + Δₖ          (exact identity-based bound)
//! ‖zᵏ − P_c(zᵏ)‖  ≤ 2‖z⁰ − z*‖/(k+1) + √Θₖ           (closed-form envelope)
//! ```

use crate::error::{HippmError, Result};
use crate::linalg::Vector;
use crate::solver::{eps_schedule, IterateTrace};

/// Terms summed explicitly in [`beta0`] before switching to the asymptotic tail.
const BETA0_EXPLICIT_TERMS: usize = 1000;

/// Distance from a branch boundary (δ = 1 or 2) within which the boundary formula is used.
pub const BRANCH_TOL: f64 = 1e-12;

/// `Σ_{k≥0} 1/(k+2)^{1+δ}`.
///
/// Explicit partial sum over the first terms, then an Euler–Maclaurin tail with
/// three correction terms. The remainder is far below `tail_tol` for any
/// `tail_tol ≥ 1e-15`, so the argument only guards the contract.
pub fn beta0(delta: f64, tail_tol: f64) -> Result<f64> {
    eps_schedule(delta, 0)?;
    if !(tail_tol.is_finite() && tail_tol > 0.0) {
        return Err(HippmError::invalid("tail_tol must be positive"));
    }
    let s = 1.0 + delta;
    let n0 = BETA0_EXPLICIT_TERMS + 2;
    // small terms first
    let head: f64 = (2..n0).rev().map(|n| (n as f64).powf(-s)).sum();
    let n = n0 as f64;
    let tail = n.powf(1.0 - s) / delta + 0.5 * n.powf(-s) + s * n.powf(-s - 1.0) / 12.0
        - s * (s + 1.0) * (s + 2.0) * n.powf(-s - 3.0) / 720.0;
    Ok(head + tail)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvelopeParams {
    pub delta: f64,
    pub beta0: f64,
    pub kappa0: f64,
    pub dist0: f64,
}

impl EnvelopeParams {
    /// Parameters for the rule `εₖ = 1/(k+2)^{1+δ}` and `dist0 = ‖z⁰ − z*‖`.
    pub fn new(delta: f64, dist0: f64) -> Result<Self> {
        let b = beta0(delta, 1e-14)?;
        Self::from_parts(delta, b, dist0)
    }

    /// Explicit `β₀` (e.g. `Σ εⱼ` of a custom sequence); `κ₀ = 2(β₀ + dist0)`.
    pub fn from_parts(delta: f64, beta0: f64, dist0: f64) -> Result<Self> {
        if !(delta.is_finite() && delta > 0.0) {
            return Err(HippmError::invalid("delta must be positive"));
        }
        if !(beta0.is_finite() && beta0 >= 0.0 && dist0.is_finite() && dist0 >= 0.0) {
            return Err(HippmError::invalid("beta0 and dist0 must be finite and ≥ 0"));
        }
        Ok(Self {
            delta,
            beta0,
            kappa0: 2.0 * (beta0 + dist0),
            dist0,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThetaBranch {
    Below1,
    One,
    Between1And2,
    Two,
    Above2,
}

pub fn theta_branch(delta: f64) -> ThetaBranch {
    if (delta - 1.0).abs() <= BRANCH_TOL {
        ThetaBranch::One
    } else if (delta - 2.0).abs() <= BRANCH_TOL {
        ThetaBranch::Two
    } else if delta < 1.0 {
        ThetaBranch::Below1
    } else if delta < 2.0 {
        ThetaBranch::Between1And2
    } else {
        ThetaBranch::Above2
    }
}

/// `Θₖ` for `k ≥ 1`.
pub fn theta(params: &EnvelopeParams, k: usize) -> f64 {
    let d = params.delta;
    let kap = params.kappa0;
    let b = params.beta0;
    let t = (k + 1) as f64;
    let ln = t.ln();
    match theta_branch(d) {
        ThetaBranch::Below1 => {
            8.0 * kap * b / t.powi(2)
                + 4.0 * kap / t.powf(2.0 + d)
                + 4.0 * kap * (3.0 - d) / (1.0 - d) / t.powf(1.0 + d)
                + 8.0 * kap / (2.0 - d) / t.powf(d)
        }
        ThetaBranch::One => {
            4.0 * kap * (1.0 + 2.0 * b) / t.powi(2)
                + 4.0 * kap / t.powi(3)
                + 8.0 * kap * ln / t.powi(2)
                + 8.0 * kap / t
        }
        ThetaBranch::Between1And2 => {
            8.0 * kap * (1.0 / (d - 1.0) + b) / t.powi(2)
                + 4.0 * kap / t.powf(2.0 + d)
                + 4.0 * kap / t.powf(1.0 + d)
                + 8.0 * kap / (2.0 - d) / t.powf(d)
        }
        ThetaBranch::Two => {
            8.0 * kap * (1.0 + b) / t.powi(2)
                + 4.0 * kap / t.powi(4)
                + 4.0 * kap / t.powi(3)
                + 8.0 * kap * ln / t.powi(2)
        }
        ThetaBranch::Above2 => {
            8.0 * kap * (1.0 / (d - 1.0) + 1.0 / (d - 2.0) + b) / t.powi(2)
                + 4.0 * kap / t.powf(2.0 + d)
                + 4.0 * kap / t.powf(1.0 + d)
        }
    }
}

/// `2·dist0/(k+1) + √Θₖ`.
pub fn theta_envelope(params: &EnvelopeParams, k: usize) -> f64 {
    envelope_exact(params.dist0, k) + theta(params, k).sqrt()
}

/// Envelope with exact resolvents: `2·dist0/(k+1)`.
pub fn envelope_exact(dist0: f64, k: usize) -> f64 {
    2.0 * dist0 / (k + 1) as f64
}

/// Upper bound on `Δₖ` from tolerances `eps[j] = εⱼ`, `j = 0..k−1`, with `ε₋₁ := ε₀`.
pub fn deltak_upper(params: &EnvelopeParams, eps: &[f64], k: usize) -> Result<f64> {
    if k == 0 {
        return Err(HippmError::invalid("Δₖ is defined for k ≥ 1"));
    }
    if eps.len() < k {
        return Err(HippmError::MissingData(format!(
            "need ε₀..ε_{} ({} values), got {}",
            k - 1,
            k,
            eps.len()
        )));
    }
    let e = |i: isize| if i < 0 { eps[0] } else { eps[i as usize] };
    let kap = params.kappa0;
    let kf = k as f64;
    let t2 = (kf + 1.0).powi(2);
    let mut s_lin = 0.0;
    let mut s_sq = 0.0;
    for j in 1..k {
        let ej = e(j as isize - 1);
        let jf = j as f64;
        s_lin += jf * ej;
        s_sq += (jf + 1.0).powi(2) * ej;
    }
    let ek = e(k as isize - 1);
    Ok(4.0 * kap * ek * kf / t2
        + 8.0 * kap * params.beta0 / t2
        + 8.0 * kap * s_lin / t2
        + 4.0 * kap * ek
        + 8.0 * kap * s_sq / t2)
}

fn reference_points(trace: &IterateTrace, k: usize) -> Result<Vec<&Vector>> {
    if trace.rows.len() <= k {
        return Err(HippmError::MissingData(format!(
            "trace has {} rows, need row {k}",
            trace.rows.len()
        )));
    }
    trace.rows[..=k]
        .iter()
        .map(|r| {
            r.reference_point.as_ref().ok_or_else(|| {
                HippmError::MissingData(format!("row {} lacks the reference resolvent", r.k))
            })
        })
        .collect()
}

/// `Δₖ` evaluated from the stored iterates, `ηʲ = z̄ʲ − P_c(zʲ)` and `P_c(zʲ)`.
/// Requires constant `c` over rows `0..=k`.
pub fn deltak_exact(trace: &IterateTrace, k: usize) -> Result<f64> {
    if k == 0 {
        return Err(HippmError::invalid("Δₖ is defined for k ≥ 1"));
    }
    let p = reference_points(trace, k)?;
    let rows = &trace.rows[..=k];
    if rows.iter().any(|r| r.c != rows[0].c) {
        return Err(HippmError::invalid("Δₖ requires a constant proximal parameter"));
    }
    let n = trace.anchor.len();
    let eta: Vec<Vector> = rows.iter().zip(&p).map(|(r, pj)| &r.zbar - *pj).collect();
    // ηʲ⁻¹ with η⁻¹ = 0 (its two occurrences cancel)
    let zero = Vector::zeros(n);
    let prev = |j: usize| if j == 0 { &zero } else { &eta[j - 1] };
    let z0 = &trace.anchor;
    let zk = &rows[k].z;
    let kf = k as f64;
    let t2 = (kf + 1.0).powi(2);

    let mut s2 = 0.0;
    let mut s3 = 0.0;
    let mut s5 = 0.0;
    let mut s6 = 0.0;
    for j in 0..k {
        let jf = j as f64;
        let w = (jf + 1.0) / (jf + 2.0);
        let z0_zj = z0 - &rows[j].z;
        let r = p[j] - &rows[j].z;
        s2 += w * z0_zj.dot(&eta[j]);
        s3 += jf * z0_zj.dot(&(&eta[j] * w - prev(j)));
        s5 += (jf + 1.0).powi(3) / (jf + 2.0) * r.dot(&(prev(j) - &eta[j]));
        s6 += w * r.dot(prev(j));
    }
    let s7: f64 = (1..=k)
        .map(|j| {
            let jf = j as f64;
            jf * jf / (jf + 1.0) * eta[j - 1].norm_squared()
        })
        .sum();
    let t1 = 4.0 * kf / t2 * (zk - z0).dot(&eta[k - 1]);
    let t4 = 4.0 * kf / (kf + 1.0) * (zk - p[k]).dot(&eta[k - 1]);
    Ok(t1 + 4.0 / t2 * (s2 + s3 - s5 + s6 - s7) + t4)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MasterCheck {
    pub k: usize,
    /// `‖zᵏ − P_c(zᵏ)‖²`
    pub lhs: f64,
    /// `4·dist0²/(k+1)² + Δₖ`
    pub rhs: f64,
    pub deltak: f64,
    /// `rhs < 0`, reported as a clamped zero radicand.
    pub radicand_clamped: bool,
    pub satisfied: bool,
}

/// `‖zᵏ − P_c(zᵏ)‖² ≤ 4‖z⁰ − z*‖²/(k+1)² + Δₖ` with absolute slack `slack`.
pub fn master_check(trace: &IterateTrace, k: usize, slack: f64) -> Result<MasterCheck> {
    let dist0 = trace
        .dist0()
        .ok_or_else(|| HippmError::MissingData("zero of the operator unknown".into()))?;
    let deltak = deltak_exact(trace, k)?;
    let row = &trace.rows[k];
    let p = row.reference_point.as_ref().expect("checked by deltak_exact");
    let lhs = (&row.z - p).norm_squared();
    let rhs = 4.0 * dist0 * dist0 / ((k + 1) as f64).powi(2) + deltak;
    Ok(MasterCheck {
        k,
        lhs,
        rhs,
        deltak,
        radicand_clamped: rhs < 0.0,
        satisfied: lhs <= rhs + slack,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnvelopeKind {
    /// Exact resolvents: `2·dist0/(k+1)`.
    Exact,
    /// Criterion (A) with the generated rule: `2·dist0/(k+1) + √Θₖ`.
    Theta,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundRow {
    pub k: usize,
    pub observed_residual: f64,
    pub envelope: f64,
    pub deltak_upper: Option<f64>,
    pub deltak_exact: Option<f64>,
    pub satisfied: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub kind: EnvelopeKind,
    pub rows: Vec<BoundRow>,
}

impl BoundReport {
    pub fn first_failure(&self) -> Option<usize> {
        self.rows.iter().find(|r| !r.satisfied).map(|r| r.k)
    }

    pub fn all_pass(&self) -> bool {
        self.first_failure().is_none()
    }

    pub fn violations(&self) -> usize {
        self.rows.iter().filter(|r| !r.satisfied).count()
    }
}

pub fn envelope_value(kind: EnvelopeKind, params: &EnvelopeParams, k: usize) -> f64 {
    match kind {
        EnvelopeKind::Exact => envelope_exact(params.dist0, k),
        EnvelopeKind::Theta => theta_envelope(params, k),
    }
}

/// Envelope check over `(k, residual)` pairs; `k = 0` entries are skipped.
pub fn check_envelope(
    kind: EnvelopeKind,
    params: &EnvelopeParams,
    residuals: impl IntoIterator<Item = (usize, f64)>,
) -> BoundReport {
    let rows = residuals
        .into_iter()
        .filter(|(k, _)| *k >= 1)
        .map(|(k, observed)| {
            let envelope = envelope_value(kind, params, k);
            BoundRow {
                k,
                observed_residual: observed,
                envelope,
                deltak_upper: None,
                deltak_exact: None,
                satisfied: observed <= envelope * (1.0 + 1e-9),
            }
        })
        .collect();
    BoundReport { kind, rows }
}

/// Envelope report for a trace run with constant `c` and known zero. With
/// `with_deltas`, rows also carry both `Δₖ` values (needs stored reference points).
pub fn bound_report(trace: &IterateTrace, kind: EnvelopeKind, with_deltas: bool) -> Result<BoundReport> {
    let dist0 = trace
        .dist0()
        .ok_or_else(|| HippmError::MissingData("zero of the operator unknown".into()))?;
    if trace.constant_c().is_none() {
        return Err(HippmError::invalid("envelope requires a constant proximal parameter"));
    }
    let params = EnvelopeParams::new(trace.delta_exponent, dist0)?;
    let mut report = check_envelope(
        kind,
        &params,
        trace
            .rows
            .iter()
            .filter_map(|r| r.residual.map(|res| (r.k, res))),
    );
    if with_deltas {
        let eps: Vec<f64> = trace.rows.iter().map(|r| r.tolerance).collect();
        for row in &mut report.rows {
            row.deltak_upper = Some(deltak_upper(&params, &eps, row.k)?);
            row.deltak_exact = Some(deltak_exact(trace, row.k)?);
        }
    }
    Ok(report)
}

/// Least-squares slope of `ln v` against `ln(k+1)` over `k ∈ [k_min, k_max]`, on a
/// geometric subsample of the available points.
pub fn fit_slope(points: &[(usize, f64)], k_min: usize, k_max: usize) -> Result<f64> {
    if k_min < 10 || k_max < 2 * k_min {
        return Err(HippmError::invalid(format!(
            "window needs k_max ≥ 2·k_min ≥ 20, got [{k_min}, {k_max}]"
        )));
    }
    let mut window: Vec<(usize, f64)> = points
        .iter()
        .copied()
        .filter(|(k, _)| (k_min..=k_max).contains(k))
        .collect();
    window.sort_by_key(|p| p.0);
    if let Some(&(k, _)) = window.iter().find(|(_, v)| !(*v > 0.0)) {
        return Err(HippmError::ConvergedBeforeWindow { k });
    }
    let first = window.first().map(|p| p.0);
    let last = window.last().map(|p| p.0);
    if first.is_none() || last.map(|l| l * 2 < k_max).unwrap_or(true) {
        return Err(HippmError::MissingData(format!(
            "window [{k_min}, {k_max}] not covered by the data"
        )));
    }
    const SAMPLES: usize = 400;
    let lo = (k_min as f64 + 1.0).ln();
    let hi = (k_max as f64 + 1.0).ln();
    let mut picked: Vec<(f64, f64)> = Vec::with_capacity(SAMPLES);
    let mut idx = 0;
    let mut last_k = None;
    for s in 0..SAMPLES {
        let target = (lo + (hi - lo) * s as f64 / (SAMPLES - 1) as f64).exp() - 1.0;
        while idx < window.len() && (window[idx].0 as f64) < target - 1e-9 {
            idx += 1;
        }
        if idx == window.len() {
            break;
        }
        let (k, v) = window[idx];
        if last_k != Some(k) {
            picked.push((((k + 1) as f64).ln(), v.ln()));
            last_k = Some(k);
        }
    }
    if picked.len() < 2 {
        return Err(HippmError::MissingData("fewer than two points in window".into()));
    }
    let n = picked.len() as f64;
    let mx = picked.iter().map(|p| p.0).sum::<f64>() / n;
    let my = picked.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = picked.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = picked.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

/// Empirical residual slope of a trace over `[k_min, k_max]`.
pub fn fit_rate(trace: &IterateTrace, k_min: usize, k_max: usize) -> Result<f64> {
    let points: Vec<(usize, f64)> = trace
        .rows
        .iter()
        .filter_map(|r| r.residual.map(|v| (r.k, v)))
        .collect();
    fit_slope(&points, k_min, k_max)
}

/// Slope of the closed-form envelope over `[k_min, k_max]`.
pub fn envelope_slope(params: &EnvelopeParams, k_min: usize, k_max: usize) -> Result<f64> {
    let ks = log_grid(k_min, k_max, 400);
    let points: Vec<(usize, f64)> = ks.into_iter().map(|k| (k, theta_envelope(params, k))).collect();
    fit_slope(&points, k_min, k_max)
}

/// Predicted asymptotic envelope order: `−δ/2` for `δ < 2`, `−1` beyond.
pub fn predicted_slope(delta: f64) -> f64 {
    if delta < 2.0 - BRANCH_TOL {
        -delta / 2.0
    } else {
        -1.0
    }
}

fn log_grid(k_min: usize, k_max: usize, n: usize) -> Vec<usize> {
    let lo = (k_min as f64).ln();
    let hi = (k_max as f64).ln();
    let mut out: Vec<usize> = (0..n)
        .map(|i| (lo + (hi - lo) * i as f64 / (n - 1) as f64).exp().round() as usize)
        .map(|k| k.clamp(k_min, k_max))
        .collect();
    out.dedup();
    out
}

/// `μₖ = a/√(a² + cₖ²)`.
pub fn mu_k(a: f64, c: f64) -> f64 {
    a / a.hypot(c)
}

/// `ϑₖ = (μₖ + δₖ)/(1 − δₖ)`; infinite when `δₖ ≥ 1`.
pub fn vartheta_k(mu: f64, delta_k: f64) -> f64 {
    if delta_k >= 1.0 {
        f64::INFINITY
    } else {
        (mu + delta_k) / (1.0 - delta_k)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearRateParams {
    pub a: f64,
    pub mu: Vec<f64>,
    pub vartheta: Vec<f64>,
}

impl LinearRateParams {
    pub fn new(a: f64, c: &[f64], delta: &[f64]) -> Result<Self> {
        if !(a.is_finite() && a > 0.0) {
            return Err(HippmError::invalid("modulus a must be positive"));
        }
        if c.len() != delta.len() {
            return Err(HippmError::DimensionMismatch {
                expected: c.len(),
                got: delta.len(),
            });
        }
        let mu: Vec<f64> = c.iter().map(|&ck| mu_k(a, ck)).collect();
        let vartheta = mu.iter().zip(delta).map(|(&m, &d)| vartheta_k(m, d)).collect();
        Ok(Self { a, mu, vartheta })
    }

    /// From the `cₖ` and `δₖ` recorded in a trace.
    pub fn from_trace(a: f64, trace: &IterateTrace) -> Result<Self> {
        let c: Vec<f64> = trace.rows.iter().map(|r| r.c).collect();
        let d: Vec<f64> = trace.rows.iter().map(|r| r.tolerance).collect();
        Self::new(a, &c, &d)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearRateReport {
    /// Smallest `k̄` such that every later row satisfies the contraction; `None` if the last row fails.
    pub k_bar: Option<usize>,
    /// Largest `‖z̄ᵏ − z̄‖ − ϑₖ‖zᵏ − z̄‖` over rows `k ≥ k̄` (or all rows when `k̄` is absent).
    pub max_violation: f64,
    pub ratios: Vec<f64>,
}

/// Checks `‖z̄ᵏ − z̄‖ ≤ ϑₖ‖zᵏ − z̄‖` row by row.
pub fn linear_rate_check(
    trace: &IterateTrace,
    params: &LinearRateParams,
    zbar_star: &Vector,
) -> Result<LinearRateReport> {
    if params.vartheta.len() < trace.rows.len() {
        return Err(HippmError::MissingData("ϑₖ sequence shorter than trace".into()));
    }
    let slack = 1e-15 * (1.0 + zbar_star.norm());
    let mut ok = Vec::with_capacity(trace.rows.len());
    let mut gaps = Vec::with_capacity(trace.rows.len());
    let mut ratios = Vec::with_capacity(trace.rows.len());
    for (row, &th) in trace.rows.iter().zip(&params.vartheta) {
        let lhs = (&row.zbar - zbar_star).norm();
        let base = (&row.z - zbar_star).norm();
        let rhs = th * base;
        gaps.push(lhs - rhs);
        ok.push(lhs <= rhs + slack);
        ratios.push(if base > 0.0 { lhs / base } else { 0.0 });
    }
    let k_bar = match ok.iter().rposition(|&b| !b) {
        None => Some(0),
        Some(i) if i + 1 < ok.len() => Some(i + 1),
        Some(_) => None,
    };
    let from = k_bar.unwrap_or(0);
    let max_violation = gaps[from..].iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(LinearRateReport {
        k_bar: k_bar.map(|i| trace.rows[i].k),
        max_violation,
        ratios,
    })
}
