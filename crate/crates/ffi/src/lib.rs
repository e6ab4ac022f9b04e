//! C ABI over the `hippm` solvers.
//!
//! Objects cross the boundary as opaque handles created by `*_new`/`hippm_solve`
//! style functions and released with the matching `*_free`. Every function
//! returns a [`HippmStatus`]; on failure [`hippm_last_error_message`] describes
//! the error for the calling thread. Matrices are dense and row-major.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use hippm::alm::{run_alm, ALMConfig, ALMTrace, AlmSchedule, ConvexProgram};
use hippm::rates::{beta0, theta_envelope, EnvelopeParams};
use hippm::solver::{
    eps_schedule, run_hippm, Criterion, ErrorMode, IterateTrace, Method, ProxParamSchedule, SolveConfig,
    ToleranceSchedule,
};
use hippm::{
    AffineOperator, BoxNormalCone, HippmError, Matrix, MonotoneOperator, QuadraticBoxSubdifferential,
    ScaledIdentityPlusSkew, Vector,
};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HippmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    NotMonotone = 4,
    CriterionFailure = 5,
    InnerStalled = 6,
    Unavailable = 7,
    Parse = 8,
    OutOfRange = 9,
    Panic = 10,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HippmMethod {
    Halpern = 0,
    Classical = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HippmCriterion {
    A = 0,
    B = 1,
}

/// Options for [`hippm_solve`]. The proximal parameter is constant.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct HippmSolveOptions {
    pub method: HippmMethod,
    pub criterion: HippmCriterion,
    pub delta: f64,
    pub c: f64,
    pub max_iter: usize,
    pub stop_residual: f64,
    pub residual_stride: usize,
    /// Nonzero: inject full-budget errors in seeded random directions.
    pub adversarial: bool,
    pub seed: u64,
}

/// Opaque monotone operator.
pub struct HippmOperator(MonotoneOperator);
/// Opaque iterate trace.
pub struct HippmTrace(IterateTrace);
/// Opaque convex QP.
pub struct HippmProgram(ConvexProgram);
/// Opaque augmented Lagrangian trace.
pub struct HippmAlmTrace(ALMTrace);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &HippmError) -> HippmStatus {
    match e {
        HippmError::DimensionMismatch { .. } => HippmStatus::DimensionMismatch,
        HippmError::NotMonotone(_) => HippmStatus::NotMonotone,
        HippmError::CriterionBUnattainable { .. } => HippmStatus::CriterionFailure,
        HippmError::InnerSolverStalled { .. } => HippmStatus::InnerStalled,
        HippmError::ExactResolventUnavailable
        | HippmError::CertificateUnavailable
        | HippmError::MissingData(_)
        | HippmError::ConvergedBeforeWindow { .. } => HippmStatus::Unavailable,
        HippmError::Parse { .. } | HippmError::Io(_) => HippmStatus::Parse,
        HippmError::NonFinite(_)
        | HippmError::InvalidArgument(_)
        | HippmError::InvalidSchedule(_)
        | HippmError::SingularSystem => HippmStatus::InvalidArgument,
    }
}

struct Fail(HippmStatus, String);

impl From<HippmError> for Fail {
    fn from(e: HippmError) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(HippmStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> HippmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error("");
            HippmStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_last_error(&msg);
            status
        }
        Err(_) => {
            set_last_error("internal panic");
            HippmStatus::Panic
        }
    }
}

unsafe fn read_vec(p: *const f64, n: usize, what: &str) -> Result<Vector, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(Vector::from_column_slice(std::slice::from_raw_parts(p, n)))
}

unsafe fn read_mat(p: *const f64, rows: usize, cols: usize, what: &str) -> Result<Matrix, Fail> {
    if p.is_null() && rows * cols > 0 {
        return Err(null(what));
    }
    if rows * cols == 0 {
        return Ok(Matrix::zeros(rows, cols));
    }
    Ok(Matrix::from_row_slice(rows, cols, std::slice::from_raw_parts(p, rows * cols)))
}

unsafe fn write_out<T>(out: *mut T, v: T, what: &str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null(what));
    }
    *out = v;
    Ok(())
}

unsafe fn write_slice(out: *mut f64, len: usize, v: &Vector) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null("output buffer"));
    }
    if len != v.len() {
        return Err(HippmError::DimensionMismatch {
            expected: v.len(),
            got: len,
        }
        .into());
    }
    std::slice::from_raw_parts_mut(out, len).copy_from_slice(v.as_slice());
    Ok(())
}

unsafe fn boxed_op(out: *mut *mut HippmOperator, op: MonotoneOperator) -> Result<(), Fail> {
    write_out(out, Box::into_raw(Box::new(HippmOperator(op))), "out")
}

unsafe fn op_ref<'a>(op: *const HippmOperator) -> Result<&'a MonotoneOperator, Fail> {
    op.as_ref().map(|o| &o.0).ok_or_else(|| null("operator"))
}

/// Message for the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn hippm_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// `T(z) = Mz + q`, `M` row-major `n×n`.
///
/// # Safety
/// `m` must point to `n*n` doubles, `q` to `n` doubles, `out` to a writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn hippm_operator_affine(
    n: usize,
    m: *const f64,
    q: *const f64,
    out: *mut *mut HippmOperator,
) -> HippmStatus {
    guard(|| {
        let op = AffineOperator::new(read_mat(m, n, n, "m")?, read_vec(q, n, "q")?)?;
        boxed_op(out, op.into())
    })
}

/// Normal cone of `[lower, upper]`; infinite bounds allowed.
///
/// # Safety
/// `lower` and `upper` must point to `n` doubles, `out` to a writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn hippm_operator_box(
    n: usize,
    lower: *const f64,
    upper: *const f64,
    out: *mut *mut HippmOperator,
) -> HippmStatus {
    guard(|| {
        let op = BoxNormalCone::new(read_vec(lower, n, "lower")?, read_vec(upper, n, "upper")?)?;
        boxed_op(out, op.into())
    })
}

/// `T = μI + S` with `S` skew-symmetric, row-major `n×n`.
///
/// # Safety
/// `s` must point to `n*n` doubles, `out` to a writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn hippm_operator_scaled_skew(
    n: usize,
    mu: f64,
    s: *const f64,
    out: *mut *mut HippmOperator,
) -> HippmStatus {
    guard(|| {
        let op = ScaledIdentityPlusSkew::new(mu, read_mat(s, n, n, "s")?)?;
        boxed_op(out, op.into())
    })
}

/// Subdifferential of `½xᵀQx + qᵀx` plus the indicator of `[lower, upper]`.
///
/// # Safety
/// `qm` must point to `n*n` doubles; `q`, `lower`, `upper` to `n` doubles each.
#[no_mangle]
pub unsafe extern "C" fn hippm_operator_quadratic_box(
    n: usize,
    qm: *const f64,
    q: *const f64,
    lower: *const f64,
    upper: *const f64,
    out: *mut *mut HippmOperator,
) -> HippmStatus {
    guard(|| {
        let region = BoxNormalCone::new(read_vec(lower, n, "lower")?, read_vec(upper, n, "upper")?)?;
        let op = QuadraticBoxSubdifferential::new(read_mat(qm, n, n, "qm")?, read_vec(q, n, "q")?, region)?;
        boxed_op(out, op.into())
    })
}

/// # Safety
/// `op` must be null or a handle from an operator constructor, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hippm_operator_free(op: *mut HippmOperator) {
    if !op.is_null() {
        drop(Box::from_raw(op));
    }
}

/// # Safety
/// `op` must be a live operator handle, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn hippm_operator_dim(op: *const HippmOperator, out: *mut usize) -> HippmStatus {
    guard(|| write_out(out, op_ref(op)?.dim(), "out"))
}

/// Approximate resolvent `(I + cT)⁻¹y` with certified error ≤ `tol`.
///
/// # Safety
/// `y` and `out_point` must hold `n` doubles; `out_error_bound` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hippm_resolvent(
    op: *const HippmOperator,
    c: f64,
    y: *const f64,
    n: usize,
    tol: f64,
    out_point: *mut f64,
    out_error_bound: *mut f64,
) -> HippmStatus {
    guard(|| {
        let op = op_ref(op)?;
        let r = op.resolvent(c, &read_vec(y, n, "y")?, tol)?;
        write_slice(out_point, n, &r.point)?;
        write_out(out_error_bound, r.error_bound, "out_error_bound")
    })
}

/// `‖z − P_c(z)‖` through a reference-accuracy resolvent.
///
/// # Safety
/// `z` must hold `n` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hippm_fixed_point_residual(
    op: *const HippmOperator,
    c: f64,
    z: *const f64,
    n: usize,
    out: *mut f64,
) -> HippmStatus {
    guard(|| {
        let op = op_ref(op)?;
        let z = read_vec(z, n, "z")?;
        let ref_tol = hippm::linalg::reference_tol(&z);
        write_out(out, hippm::fixed_point_residual(op, c, &z, ref_tol)?, "out")
    })
}

/// Runs the iteration from `anchor` and returns a trace handle.
///
/// # Safety
/// `options` must be valid, `anchor` must hold `n` doubles, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn hippm_solve(
    op: *const HippmOperator,
    options: *const HippmSolveOptions,
    anchor: *const f64,
    n: usize,
    out: *mut *mut HippmTrace,
) -> HippmStatus {
    guard(|| {
        let op = op_ref(op)?;
        let o = options.as_ref().ok_or_else(|| null("options"))?;
        let mut cfg = SolveConfig::new(read_vec(anchor, n, "anchor")?);
        cfg.method = match o.method {
            HippmMethod::Halpern => Method::Halpern,
            HippmMethod::Classical => Method::Classical,
        };
        let kind = match o.criterion {
            HippmCriterion::A => Criterion::A,
            HippmCriterion::B => Criterion::B,
        };
        cfg.tolerance = ToleranceSchedule::new(kind, o.delta)?;
        cfg.prox_schedule = ProxParamSchedule::Constant(o.c);
        cfg.max_iter = o.max_iter;
        cfg.stop_residual = o.stop_residual;
        cfg.residual_stride = o.residual_stride.max(1);
        cfg.store_reference = false;
        cfg.error_mode = if o.adversarial {
            ErrorMode::AdversarialFullBudget { seed: o.seed }
        } else {
            ErrorMode::Natural
        };
        let trace = run_hippm(op, &cfg)?;
        write_out(out, Box::into_raw(Box::new(HippmTrace(trace))), "out")
    })
}

unsafe fn trace_ref<'a>(t: *const HippmTrace) -> Result<&'a IterateTrace, Fail> {
    t.as_ref().map(|t| &t.0).ok_or_else(|| null("trace"))
}

fn row_at<T>(rows: &[T], k: usize) -> Result<&T, Fail> {
    rows.get(k)
        .ok_or_else(|| Fail(HippmStatus::OutOfRange, format!("no row {k}")))
}

/// # Safety
/// `trace` must be null or a handle from [`hippm_solve`], not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hippm_trace_free(trace: *mut HippmTrace) {
    if !trace.is_null() {
        drop(Box::from_raw(trace));
    }
}

/// # Safety
/// `trace` must be a live trace handle, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn hippm_trace_len(trace: *const HippmTrace, out: *mut usize) -> HippmStatus {
    guard(|| write_out(out, trace_ref(trace)?.len(), "out"))
}

/// Reference residual at row `k`; `Unavailable` when the row was skipped by the stride.
///
/// # Safety
/// `trace` must be a live trace handle, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn hippm_trace_residual(trace: *const HippmTrace, k: usize, out: *mut f64) -> HippmStatus {
    guard(|| {
        let row = row_at(&trace_ref(trace)?.rows, k)?;
        let r = row
            .residual
            .ok_or_else(|| Fail(HippmStatus::Unavailable, format!("no residual at row {k}")))?;
        write_out(out, r, "out")
    })
}

/// Certified error bound used at row `k`.
///
/// # Safety
/// `trace` must be a live trace handle, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn hippm_trace_error_bound(trace: *const HippmTrace, k: usize, out: *mut f64) -> HippmStatus {
    guard(|| write_out(out, row_at(&trace_ref(trace)?.rows, k)?.eps_used, "out"))
}

/// Copies the iterate `zᵏ` into `out` (length `n`).
///
/// # Safety
/// `trace` must be a live trace handle, `out` must hold `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn hippm_trace_iterate(
    trace: *const HippmTrace,
    k: usize,
    out: *mut f64,
    n: usize,
) -> HippmStatus {
    guard(|| write_slice(out, n, &row_at(&trace_ref(trace)?.rows, k)?.z))
}

/// `1/(k+2)^(1+delta)`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hippm_eps_schedule(delta: f64, k: usize, out: *mut f64) -> HippmStatus {
    guard(|| write_out(out, eps_schedule(delta, k)?, "out"))
}

/// `Σ_{k≥0} 1/(k+2)^(1+delta)`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hippm_beta0(delta: f64, out: *mut f64) -> HippmStatus {
    guard(|| write_out(out, beta0(delta, 1e-14)?, "out"))
}

/// Residual envelope `2·dist0/(k+1) + √Θₖ` for the tolerance exponent `delta`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hippm_theta_envelope(delta: f64, dist0: f64, k: usize, out: *mut f64) -> HippmStatus {
    guard(|| {
        if k == 0 {
            return Err(Fail(HippmStatus::OutOfRange, "envelope is defined for k ≥ 1".into()));
        }
        let p = EnvelopeParams::new(delta, dist0)?;
        write_out(out, theta_envelope(&p, k), "out")
    })
}

/// `min ½xᵀQx + qᵀx` s.t. `Ax ≤ b`, `lower ≤ x ≤ upper`; `A` is `m×n`.
///
/// # Safety
/// `qm` holds `n*n`, `a` holds `m*n` (may be null when `m = 0`), `q`, `lower`,
/// `upper` hold `n`, `b` holds `m` doubles; `out` writable.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn hippm_program_new(
    n: usize,
    m: usize,
    qm: *const f64,
    q: *const f64,
    a: *const f64,
    b: *const f64,
    lower: *const f64,
    upper: *const f64,
    out: *mut *mut HippmProgram,
) -> HippmStatus {
    guard(|| {
        let region = BoxNormalCone::new(read_vec(lower, n, "lower")?, read_vec(upper, n, "upper")?)?;
        let b = if m == 0 { Vector::zeros(0) } else { read_vec(b, m, "b")? };
        let prog = ConvexProgram::new(
            read_mat(qm, n, n, "qm")?,
            read_vec(q, n, "q")?,
            read_mat(a, m, n, "a")?,
            b,
            region,
        )?;
        write_out(out, Box::into_raw(Box::new(HippmProgram(prog))), "out")
    })
}

/// # Safety
/// `prog` must be null or a handle from [`hippm_program_new`], not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hippm_program_free(prog: *mut HippmProgram) {
    if !prog.is_null() {
        drop(Box::from_raw(prog));
    }
}

/// Runs the augmented Lagrangian method. `y0` may be null (zero multipliers).
/// An inner-solver abort still yields a trace and returns `InnerStalled`.
///
/// # Safety
/// `prog` must be live; `y0` null or `m` doubles; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn hippm_alm_solve(
    prog: *const HippmProgram,
    c0: f64,
    linear_schedule: bool,
    delta: f64,
    max_outer: usize,
    y0: *const f64,
    out: *mut *mut HippmAlmTrace,
) -> HippmStatus {
    guard(|| {
        let prog = &prog.as_ref().ok_or_else(|| null("program"))?.0;
        let m = prog.constraints();
        let y0 = if y0.is_null() { Vector::zeros(m) } else { read_vec(y0, m, "y0")? };
        let schedule = if linear_schedule {
            AlmSchedule::LinearGrowth(c0)
        } else {
            AlmSchedule::Constant(c0)
        };
        let mut cfg = ALMConfig::new(y0, schedule);
        cfg.delta = delta;
        cfg.max_outer = max_outer;
        let trace = run_alm(prog, &cfg)?;
        let aborted = trace.aborted.clone();
        write_out(out, Box::into_raw(Box::new(HippmAlmTrace(trace))), "out")?;
        match aborted {
            Some(e) => Err(e.into()),
            None => Ok(()),
        }
    })
}

unsafe fn alm_ref<'a>(t: *const HippmAlmTrace) -> Result<&'a ALMTrace, Fail> {
    t.as_ref().map(|t| &t.0).ok_or_else(|| null("trace"))
}

/// # Safety
/// `trace` must be null or a handle from [`hippm_alm_solve`], not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hippm_alm_trace_free(trace: *mut HippmAlmTrace) {
    if !trace.is_null() {
        drop(Box::from_raw(trace));
    }
}

/// # Safety
/// `trace` must be live, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn hippm_alm_trace_len(trace: *const HippmAlmTrace, out: *mut usize) -> HippmStatus {
    guard(|| write_out(out, alm_ref(trace)?.rows.len(), "out"))
}

/// Copies `yᵏ⁺¹` into `out` (length `m`).
///
/// # Safety
/// `trace` must be live, `out` must hold `m` doubles.
#[no_mangle]
pub unsafe extern "C" fn hippm_alm_trace_multiplier(
    trace: *const HippmAlmTrace,
    k: usize,
    out: *mut f64,
    m: usize,
) -> HippmStatus {
    guard(|| write_slice(out, m, &row_at(&alm_ref(trace)?.rows, k)?.y_next))
}

/// Copies the weighted average `x̃ᵏ⁺¹` into `out` (length `n`).
///
/// # Safety
/// `trace` must be live, `out` must hold `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn hippm_alm_trace_average(
    trace: *const HippmAlmTrace,
    k: usize,
    out: *mut f64,
    n: usize,
) -> HippmStatus {
    guard(|| write_slice(out, n, &row_at(&alm_ref(trace)?.rows, k)?.xtilde))
}

/// `max_i f_i(x̃ᵏ⁺¹)`.
///
/// # Safety
/// `trace` must be live, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn hippm_alm_trace_feasibility(
    trace: *const HippmAlmTrace,
    k: usize,
    out: *mut f64,
) -> HippmStatus {
    guard(|| write_out(out, row_at(&alm_ref(trace)?.rows, k)?.feas_max, "out"))
}

/// Null-safe view of the last error as a Rust string (for tests and Rust callers).
pub fn last_error() -> String {
    // SAFETY: the pointer comes from a live thread-local CString.
    unsafe { CStr::from_ptr(hippm_last_error_message()) }
        .to_string_lossy()
        .into_owned()
}
