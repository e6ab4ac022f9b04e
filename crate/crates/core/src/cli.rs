//! `hippm` command-line front end.
//!
//! Exit codes: 0 success, 1 bound failure or i/o error, 2 criterion failure or
//! inner-solver abort, 3 parse or dimension error (no output written), 4 trace and
//! instance do not match.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::alm::{run_alm, thm42_bounds, ALMConfig, AlmSchedule};
use crate::error::HippmError;
use crate::instance::{Instance, InstanceBody};
use crate::linalg::Vector;
use crate::operator::MonotoneOperator;
use crate::rates::{
    envelope_exact, fit_slope, predicted_slope, theta_envelope, EnvelopeKind, EnvelopeParams,
};
use crate::solver::{
    eps_schedule, run_hippm, Criterion, ErrorMode, IterateTrace, Method, ProxParamSchedule,
    SolveConfig, ToleranceSchedule,
};
use crate::trace_csv::{read_trace, rows_from_alm_trace, rows_from_iterate_trace, write_trace, TraceFile};

pub const EXIT_OK: i32 = 0;
pub const EXIT_BOUND_FAILURE: i32 = 1;
pub const EXIT_CRITERION: i32 = 2;
pub const EXIT_PARSE: i32 = 3;
pub const EXIT_MISMATCH: i32 = 4;

#[derive(Parser, Debug)]
#[command(name = "hippm", version, about = "Halpern-accelerated inexact proximal point solver and bound checker")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the proximal point iteration on inclusion instances.
    SolveInclusion(SolveArgs),
    /// Run the augmented Lagrangian method on QP instances.
    SolveAlm(AlmArgs),
    /// Check a trace against the applicable convergence bounds.
    VerifyBounds(VerifyArgs),
    /// Fit the residual decay slope of a trace.
    Rates(RatesArgs),
    /// Paired Halpern / classical run on one instance.
    Compare(CompareArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum MethodArg {
    Halpern,
    Classical,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum CriterionArg {
    #[value(name = "A", alias = "a")]
    A,
    #[value(name = "B", alias = "b")]
    B,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum ErrorModeArg {
    Natural,
    Adversarial,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum AlmScheduleArg {
    Constant,
    Linear,
}

#[derive(Args, Debug, Clone)]
struct RunOpts {
    #[arg(long, value_enum, default_value = "halpern")]
    method: MethodArg,
    #[arg(long, value_enum, default_value = "A")]
    criterion: CriterionArg,
    /// Exponent of the tolerance rule 1/(k+2)^(1+delta).
    #[arg(long, default_value_t = 1.0)]
    delta: f64,
    /// constant:C | geometric:C0:GROWTH:CAP | linear:C0
    #[arg(long, default_value = "constant:1")]
    c_schedule: String,
    #[arg(long, default_value_t = 1000)]
    max_iter: usize,
    #[arg(long, default_value_t = 0.0)]
    stop_residual: f64,
    /// Evaluate the reference residual every N iterations.
    #[arg(long, default_value_t = 1)]
    stride: usize,
    #[arg(long, value_enum, default_value = "natural")]
    error_mode: ErrorModeArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct SolveArgs {
    #[arg(required = true)]
    instances: Vec<PathBuf>,
    #[command(flatten)]
    opts: RunOpts,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-instance outputs `<dir>/<stem>.csv`; solves run concurrently.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct AlmArgs {
    #[arg(required = true)]
    instances: Vec<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    c0: f64,
    #[arg(long, value_enum, default_value = "constant")]
    schedule: AlmScheduleArg,
    #[arg(long, default_value_t = 1.0)]
    delta: f64,
    #[arg(long, default_value_t = 1000)]
    max_outer: usize,
    /// Solve inner problems to oracle accuracy instead of the certified gap.
    #[arg(long)]
    oracle_mode: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    trace: PathBuf,
    instance: PathBuf,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct RatesArgs {
    trace: PathBuf,
    #[arg(long)]
    k_min: Option<usize>,
    #[arg(long)]
    k_max: Option<usize>,
}

#[derive(Args, Debug)]
struct CompareArgs {
    instance: PathBuf,
    #[command(flatten)]
    opts: RunOpts,
    #[arg(long)]
    out_halpern: Option<PathBuf>,
    #[arg(long)]
    out_classical: Option<PathBuf>,
}

#[derive(Debug)]
struct Failure {
    code: i32,
    msg: String,
}

impl Failure {
    fn new(code: i32, msg: impl Into<String>) -> Self {
        Self {
            code,
            msg: msg.into(),
        }
    }
}

fn code_for(e: &HippmError) -> i32 {
    match e {
        HippmError::Parse { .. }
        | HippmError::DimensionMismatch { .. }
        | HippmError::NonFinite(_)
        | HippmError::NotMonotone(_)
        | HippmError::InvalidArgument(_)
        | HippmError::InvalidSchedule(_) => EXIT_PARSE,
        HippmError::CriterionBUnattainable { .. }
        | HippmError::InnerSolverStalled { .. }
        | HippmError::ExactResolventUnavailable
        | HippmError::CertificateUnavailable
        | HippmError::SingularSystem => EXIT_CRITERION,
        HippmError::MissingData(_) => EXIT_MISMATCH,
        HippmError::ConvergedBeforeWindow { .. } | HippmError::Io(_) => EXIT_BOUND_FAILURE,
    }
}

impl From<HippmError> for Failure {
    fn from(e: HippmError) -> Self {
        Failure::new(code_for(&e), e.to_string())
    }
}

/// Parses `args` (including the program name) and runs the command; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_PARSE } else { EXIT_OK };
        }
    };
    let result = match cli.command {
        Command::SolveInclusion(a) => cmd_solve_inclusion(&a),
        Command::SolveAlm(a) => cmd_solve_alm(&a),
        Command::VerifyBounds(a) => cmd_verify_bounds(&a),
        Command::Rates(a) => cmd_rates(&a),
        Command::Compare(a) => cmd_compare(&a),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.msg);
            f.code
        }
    }
}

fn load_instance(path: &Path) -> Result<Instance, Failure> {
    Instance::load(path).map_err(|e| Failure::new(EXIT_PARSE, format!("{}: {e}", path.display())))
}

fn parse_c_schedule(s: &str) -> Result<ProxParamSchedule, Failure> {
    let parts: Vec<&str> = s.split(':').collect();
    let num = |i: usize| -> Result<f64, Failure> {
        parts
            .get(i)
            .and_then(|p| p.parse::<f64>().ok())
            .ok_or_else(|| Failure::new(EXIT_PARSE, format!("bad c-schedule {s:?}")))
    };
    let sched = match (parts[0], parts.len()) {
        ("constant", 2) => ProxParamSchedule::Constant(num(1)?),
        ("linear", 2) => ProxParamSchedule::LinearGrowth(num(1)?),
        ("geometric", 4) => ProxParamSchedule::Geometric {
            c0: num(1)?,
            growth: num(2)?,
            cap: num(3)?,
        },
        _ => return Err(Failure::new(EXIT_PARSE, format!("bad c-schedule {s:?}"))),
    };
    sched.validate()?;
    Ok(sched)
}

fn join_vec(v: &Vector) -> String {
    v.iter().map(|x| format!("{x:e}")).collect::<Vec<_>>().join(";")
}

fn split_vec(s: &str) -> Option<Vector> {
    let vals: Option<Vec<f64>> = s.split(';').map(|t| t.parse().ok()).collect();
    vals.map(Vector::from_vec)
}

/// Output target for one instance of a (possibly batched) command.
fn output_path(path: &Path, out: &Option<PathBuf>, out_dir: &Option<PathBuf>, many: bool) -> Result<Option<PathBuf>, Failure> {
    match (out, out_dir) {
        (Some(_), _) if many => Err(Failure::new(EXIT_PARSE, "--out takes a single instance; use --out-dir")),
        (Some(o), _) => Ok(Some(o.clone())),
        (None, Some(d)) => {
            let stem = path.file_stem().unwrap_or_default().to_string_lossy().to_string();
            Ok(Some(d.join(format!("{stem}.csv"))))
        }
        (None, None) if many => Err(Failure::new(EXIT_PARSE, "several instances need --out-dir")),
        (None, None) => Ok(None),
    }
}

fn emit(trace: &TraceFile, target: Option<&Path>) -> Result<(), Failure> {
    let io = |e: std::io::Error| Failure::new(EXIT_BOUND_FAILURE, e.to_string());
    match target {
        Some(p) => {
            let f = File::create(p).map_err(io)?;
            write_trace(BufWriter::new(f), trace)?;
        }
        None => write_trace(std::io::stdout().lock(), trace)?,
    }
    Ok(())
}

/// Runs `job` for every instance, concurrently when there are several.
fn for_each_instance<F>(paths: &[PathBuf], job: F) -> Result<i32, Failure>
where
    F: Fn(&Path) -> Result<i32, Failure> + Sync,
{
    if paths.len() == 1 {
        return job(&paths[0]);
    }
    let results: Vec<Result<i32, Failure>> = std::thread::scope(|s| {
        let handles: Vec<_> = paths.iter().map(|p| s.spawn(|| job(p))).collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| Err(Failure::new(EXIT_BOUND_FAILURE, "worker panicked"))))
            .collect()
    });
    let mut code = EXIT_OK;
    for (p, r) in paths.iter().zip(results) {
        match r {
            Ok(c) => code = code.max(c),
            Err(f) => {
                eprintln!("error: {}: {}", p.display(), f.msg);
                code = code.max(f.code);
            }
        }
    }
    Ok(code)
}

struct InclusionSetup {
    inst: Instance,
    op: MonotoneOperator,
    config: SolveConfig,
    z_star: Option<Vector>,
}

fn inclusion_setup(path: &Path, opts: &RunOpts, method: MethodArg) -> Result<InclusionSetup, Failure> {
    let inst = load_instance(path)?;
    let InstanceBody::Inclusion { op, anchor, z_star } = &inst.body else {
        return Err(Failure::new(EXIT_PARSE, format!("{}: not an inclusion instance", path.display())));
    };
    let anchor = anchor.clone().unwrap_or_else(|| {
        let mut e = Vector::zeros(op.dim());
        e[0] = 1.0;
        e
    });
    let mut config = SolveConfig::new(anchor);
    config.method = match method {
        MethodArg::Halpern => Method::Halpern,
        MethodArg::Classical => Method::Classical,
    };
    let kind = match opts.criterion {
        CriterionArg::A => Criterion::A,
        CriterionArg::B => Criterion::B,
    };
    config.tolerance = ToleranceSchedule::new(kind, opts.delta)?;
    config.prox_schedule = parse_c_schedule(&opts.c_schedule)?;
    config.max_iter = opts.max_iter;
    config.stop_residual = opts.stop_residual;
    config.residual_stride = opts.stride;
    config.store_reference = false;
    config.error_mode = match opts.error_mode {
        ErrorModeArg::Natural => ErrorMode::Natural,
        ErrorModeArg::Adversarial => ErrorMode::AdversarialFullBudget { seed: opts.seed },
    };
    config.validate(op.dim())?;
    Ok(InclusionSetup {
        op: op.clone(),
        z_star: z_star.clone(),
        inst,
        config,
    })
}

/// Which envelope applies to a run: exact when every certified error is zero,
/// `Θ` for criterion (A) under the generated rule, none otherwise.
fn inclusion_envelope(
    criterion: Criterion,
    delta: f64,
    constant_c: bool,
    eps: impl Iterator<Item = (usize, f64)>,
) -> Option<EnvelopeKind> {
    if !constant_c {
        return None;
    }
    let mut all_zero = true;
    let mut within = true;
    for (k, e) in eps {
        all_zero &= e == 0.0;
        within &= eps_schedule(delta, k).map(|s| e <= s).unwrap_or(false);
    }
    if all_zero {
        Some(EnvelopeKind::Exact)
    } else if criterion == Criterion::A && within {
        Some(EnvelopeKind::Theta)
    } else {
        None
    }
}

fn inclusion_trace_file(setup: &InclusionSetup, trace: &mut IterateTrace, opts: &RunOpts) -> Result<TraceFile, Failure> {
    if let Some(zs) = &setup.z_star {
        trace.zstar = Some(zs.clone());
        for row in &mut trace.rows {
            row.dist_to_star = Some((&row.z - zs).norm());
        }
    }
    let kind = inclusion_envelope(
        trace.criterion,
        trace.delta_exponent,
        trace.constant_c().is_some(),
        trace.rows.iter().map(|r| (r.k, r.eps_used)),
    );
    let params = match (kind, trace.dist0()) {
        (Some(_), Some(d)) => Some(EnvelopeParams::new(trace.delta_exponent, d)?),
        _ => None,
    };
    let env_fn: Option<Box<dyn Fn(usize) -> f64>> = match (kind, params) {
        (Some(EnvelopeKind::Exact), Some(p)) => Some(Box::new(move |k| envelope_exact(p.dist0, k))),
        (Some(EnvelopeKind::Theta), Some(p)) => Some(Box::new(move |k| theta_envelope(&p, k))),
        _ => None,
    };
    let mut file = TraceFile {
        rows: rows_from_iterate_trace(trace, env_fn.as_deref()),
        ..Default::default()
    };
    let m = &mut file.metadata;
    m.insert("kind".into(), "inclusion".into());
    m.insert("instance".into(), setup.inst.name.clone());
    m.insert("dimension".into(), setup.inst.dimension.to_string());
    m.insert("family".into(), setup.op.family().into());
    m.insert(
        "method".into(),
        match trace.method {
            Method::Halpern => "halpern",
            Method::Classical => "classical",
        }
        .into(),
    );
    m.insert(
        "criterion".into(),
        match trace.criterion {
            Criterion::A => "A",
            Criterion::B => "B",
        }
        .into(),
    );
    m.insert("delta".into(), format!("{:e}", opts.delta));
    m.insert("schedule".into(), opts.c_schedule.clone());
    m.insert(
        "error_mode".into(),
        match opts.error_mode {
            ErrorModeArg::Natural => "natural",
            ErrorModeArg::Adversarial => "adversarial",
        }
        .into(),
    );
    m.insert("seed".into(), opts.seed.to_string());
    m.insert("stride".into(), opts.stride.to_string());
    m.insert("anchor".into(), join_vec(&trace.anchor));
    m.insert(
        "envelope".into(),
        match (kind, params) {
            (Some(EnvelopeKind::Exact), Some(_)) => "exact",
            (Some(EnvelopeKind::Theta), Some(_)) => "theta",
            _ => "none",
        }
        .into(),
    );
    Ok(file)
}

fn solve_inclusion_one(path: &Path, opts: &RunOpts, target: Option<PathBuf>) -> Result<i32, Failure> {
    let setup = inclusion_setup(path, opts, opts.method)?;
    let mut trace = run_hippm(&setup.op, &setup.config)?;
    let file = inclusion_trace_file(&setup, &mut trace, opts)?;
    emit(&file, target.as_deref())?;
    if trace.rows.iter().all(|r| r.criterion_ok) {
        Ok(EXIT_OK)
    } else {
        eprintln!("{}: criterion violated on some rows", path.display());
        Ok(EXIT_CRITERION)
    }
}

fn cmd_solve_inclusion(a: &SolveArgs) -> Result<i32, Failure> {
    let many = a.instances.len() > 1;
    if let Some(d) = &a.out_dir {
        std::fs::create_dir_all(d).map_err(|e| Failure::new(EXIT_BOUND_FAILURE, e.to_string()))?;
    }
    for_each_instance(&a.instances, |p| {
        let target = output_path(p, &a.out, &a.out_dir, many)?;
        solve_inclusion_one(p, &a.opts, target)
    })
}

fn solve_alm_one(path: &Path, a: &AlmArgs, target: Option<PathBuf>) -> Result<i32, Failure> {
    let inst = load_instance(path)?;
    let InstanceBody::Qp { program, y0 } = &inst.body else {
        return Err(Failure::new(EXIT_PARSE, format!("{}: not a qp instance", path.display())));
    };
    let y0 = y0.clone().unwrap_or_else(|| Vector::zeros(program.constraints()));
    let schedule = match a.schedule {
        AlmScheduleArg::Constant => AlmSchedule::Constant(a.c0),
        AlmScheduleArg::Linear => AlmSchedule::LinearGrowth(a.c0),
    };
    let mut config = ALMConfig::new(y0, schedule);
    config.delta = a.delta;
    config.max_outer = a.max_outer;
    config.oracle_mode = a.oracle_mode;
    let trace = run_alm(program, &config)?;
    let y_star = program.solution.as_ref().and_then(|s| s.y.as_ref());
    let mut file = TraceFile {
        rows: rows_from_alm_trace(&trace, y_star),
        ..Default::default()
    };
    let m = &mut file.metadata;
    m.insert("kind".into(), "qp".into());
    m.insert("instance".into(), inst.name.clone());
    m.insert("dimension".into(), inst.dimension.to_string());
    m.insert("constraints".into(), program.constraints().to_string());
    m.insert("schedule".into(), schedule.name().into());
    m.insert("c0".into(), format!("{:e}", a.c0));
    m.insert("delta".into(), format!("{:e}", a.delta));
    m.insert("delta0".into(), format!("{:e}", trace.delta0()));
    m.insert("anchor".into(), join_vec(&trace.y0));
    emit(&file, target.as_deref())?;
    if let Some(e) = &trace.aborted {
        eprintln!("{}: inner solver aborted: {e}", path.display());
        return Ok(EXIT_CRITERION);
    }
    if trace.rows.iter().all(|r| r.criterion_ok()) {
        Ok(EXIT_OK)
    } else {
        Ok(EXIT_CRITERION)
    }
}

fn cmd_solve_alm(a: &AlmArgs) -> Result<i32, Failure> {
    let many = a.instances.len() > 1;
    if let Some(d) = &a.out_dir {
        std::fs::create_dir_all(d).map_err(|e| Failure::new(EXIT_BOUND_FAILURE, e.to_string()))?;
    }
    for_each_instance(&a.instances, |p| {
        let target = output_path(p, &a.out, &a.out_dir, many)?;
        solve_alm_one(p, a, target)
    })
}

fn read_trace_file(path: &Path) -> Result<TraceFile, Failure> {
    let f = File::open(path).map_err(|e| Failure::new(EXIT_PARSE, format!("{}: {e}", path.display())))?;
    read_trace(f).map_err(|e| Failure::new(EXIT_PARSE, format!("{}: {e}", path.display())))
}

fn mismatch(msg: impl Into<String>) -> Failure {
    Failure::new(EXIT_MISMATCH, msg)
}

struct Verdict {
    lines: Vec<String>,
    first_failure: Option<usize>,
    violations: usize,
    skipped: Option<String>,
}

fn verify_inclusion(trace: &TraceFile, inst: &Instance) -> Result<Verdict, Failure> {
    let InstanceBody::Inclusion { op, z_star, .. } = &inst.body else {
        return Err(mismatch("trace is an inclusion trace, instance is not"));
    };
    let anchor = trace
        .meta("anchor")
        .and_then(split_vec)
        .ok_or_else(|| mismatch("trace lacks a readable anchor"))?;
    if anchor.len() != op.dim() {
        return Err(mismatch("anchor dimension differs from instance"));
    }
    let skip = |why: &str| Verdict {
        lines: Vec::new(),
        first_failure: None,
        violations: 0,
        skipped: Some(why.to_string()),
    };
    let Some(zs) = z_star.clone().or_else(|| op.zero_point()) else {
        return Ok(skip("zero of the operator unknown; envelope checks skipped"));
    };
    let delta = trace.meta_f64("delta")?;
    let criterion = match trace.meta("criterion") {
        Some("A") => Criterion::A,
        Some("B") => Criterion::B,
        _ => return Err(mismatch("trace lacks the criterion")),
    };
    let c0 = trace.rows.first().and_then(|r| r.c_k);
    let constant_c = trace.rows.iter().all(|r| r.c_k.is_some() && r.c_k == c0);
    let kind = inclusion_envelope(
        criterion,
        delta,
        constant_c,
        trace.rows.iter().map(|r| (r.k, r.eps_k.unwrap_or(f64::INFINITY))),
    );
    let Some(kind) = kind else {
        return Ok(skip("no envelope available for this run (criterion B, varying c, or errors above schedule)"));
    };
    let params = EnvelopeParams::new(delta, (&anchor - &zs).norm())?;
    let report = crate::rates::check_envelope(
        kind,
        &params,
        trace.rows.iter().filter_map(|r| r.residual.map(|v| (r.k, v))),
    );
    let label = match kind {
        EnvelopeKind::Exact => "exact",
        EnvelopeKind::Theta => "theta",
    };
    let lines = report
        .rows
        .iter()
        .map(|r| {
            format!(
                "{},{label},{:.16e},{:.16e},{}",
                r.k,
                r.observed_residual,
                r.envelope,
                if r.satisfied { "pass" } else { "FAIL" }
            )
        })
        .collect();
    Ok(Verdict {
        lines,
        first_failure: report.first_failure(),
        violations: report.violations(),
        skipped: None,
    })
}

fn verify_qp(trace: &TraceFile, inst: &Instance) -> Result<Verdict, Failure> {
    let InstanceBody::Qp { program, .. } = &inst.body else {
        return Err(mismatch("trace is a qp trace, instance is not"));
    };
    if trace.meta("constraints") != Some(program.constraints().to_string().as_str()) {
        return Err(mismatch("constraint count differs from instance"));
    }
    let delta0 = trace.meta_f64("delta0")?;
    let delta = trace.meta_f64("delta")?;
    let c0 = trace.meta_f64("c0")?;
    let schedule = match trace.meta("schedule") {
        Some("constant") => AlmSchedule::Constant(c0),
        Some("linear") => AlmSchedule::LinearGrowth(c0),
        _ => return Err(mismatch("trace lacks the penalty schedule")),
    };
    let mut lines = Vec::new();
    let mut first_failure = None;
    let mut violations = 0;
    for r in &trace.rows {
        let big_k = r.k + 1;
        if big_k < 2 {
            continue;
        }
        let (fb, ob) = thm42_bounds(delta0, delta, c0, schedule, big_k)?;
        let feas_ok = r.feas_max.map_or(true, |f| f <= fb);
        let obj_ok = r.obj_gap.map_or(true, |g| g <= ob);
        if !(feas_ok && obj_ok) {
            violations += 1;
            first_failure.get_or_insert(r.k);
        }
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.16e}")).unwrap_or_default();
        lines.push(format!(
            "{},ergodic,{},{fb:.16e},{},{ob:.16e},{}",
            r.k,
            opt(r.feas_max),
            opt(r.obj_gap),
            if feas_ok && obj_ok { "pass" } else { "FAIL" }
        ));
    }
    Ok(Verdict {
        lines,
        first_failure,
        violations,
        skipped: None,
    })
}

fn cmd_verify_bounds(a: &VerifyArgs) -> Result<i32, Failure> {
    let trace = read_trace_file(&a.trace)?;
    let inst = load_instance(&a.instance)?;
    if trace.meta("instance") != Some(crate::trace_csv::sanitize(&inst.name).as_str())
        || trace.meta("dimension") != Some(inst.dimension.to_string().as_str())
        || trace.meta("kind") != Some(inst.kind())
    {
        return Err(mismatch("trace was not produced from this instance"));
    }
    let verdict = match inst.kind() {
        "inclusion" => verify_inclusion(&trace, &inst)?,
        _ => verify_qp(&trace, &inst)?,
    };
    let summary = match (&verdict.skipped, verdict.first_failure) {
        (Some(why), _) => format!("SKIPPED: {why}"),
        (None, None) => format!("ALL-PASS ({} checks)", verdict.lines.len()),
        (None, Some(k)) => format!(
            "FAIL: first failure at k={k}, {} violations in {} checks",
            verdict.violations,
            verdict.lines.len()
        ),
    };
    let mut text = String::new();
    let header = if inst.kind() == "inclusion" {
        "k,bound,observed,envelope,status"
    } else {
        "k,bound,feas_max,feas_bound,obj_gap,obj_bound,status"
    };
    let _ = writeln!(text, "{header}");
    for l in &verdict.lines {
        let _ = writeln!(text, "{l}");
    }
    let _ = writeln!(text, "# {summary}");
    if let Some(p) = &a.report {
        std::fs::write(p, &text).map_err(|e| Failure::new(EXIT_BOUND_FAILURE, e.to_string()))?;
    }
    println!("{summary}");
    Ok(if verdict.first_failure.is_some() {
        EXIT_BOUND_FAILURE
    } else {
        EXIT_OK
    })
}

fn cmd_rates(a: &RatesArgs) -> Result<i32, Failure> {
    let trace = read_trace_file(&a.trace)?;
    let points: Vec<(usize, f64)> = trace
        .rows
        .iter()
        .filter_map(|r| r.residual.map(|v| (r.k, v)))
        .collect();
    let last = points
        .last()
        .map(|p| p.0)
        .ok_or_else(|| Failure::new(EXIT_BOUND_FAILURE, "trace has no residual column data"))?;
    let k_max = a.k_max.unwrap_or(last);
    let k_min = a.k_min.unwrap_or(k_max / 10);
    let slope = match fit_slope(&points, k_min, k_max) {
        Ok(s) => s,
        Err(HippmError::ConvergedBeforeWindow { k }) => {
            println!("converged before window: nonpositive residual at k={k}");
            return Ok(EXIT_OK);
        }
        Err(e) => return Err(e.into()),
    };
    println!("slope {slope:.6} over k in [{k_min}, {k_max}]");
    let mut out = std::io::stdout().lock();
    match trace.meta("delta").and_then(|d| d.parse::<f64>().ok()) {
        Some(delta) => {
            let band = predicted_slope(delta);
            let verdict = if slope <= band + 0.1 { "within" } else { "outside" };
            let _ = writeln!(out, "predicted envelope order {band:.4} for delta={delta}: {verdict} band");
        }
        None => {
            if (slope + 1.0).abs() <= 0.05 {
                let _ = writeln!(out, "matches the delta>2 band (order -1)");
            } else {
                let _ = writeln!(out, "matches order -delta/2 with delta ~ {:.4}", -2.0 * slope);
            }
        }
    }
    Ok(EXIT_OK)
}

fn cmd_compare(a: &CompareArgs) -> Result<i32, Failure> {
    let mut code = EXIT_OK;
    let mut residuals = Vec::new();
    for (method, target) in [
        (MethodArg::Halpern, &a.out_halpern),
        (MethodArg::Classical, &a.out_classical),
    ] {
        let setup = inclusion_setup(&a.instance, &a.opts, method)?;
        let mut trace = run_hippm(&setup.op, &setup.config)?;
        if !trace.rows.iter().all(|r| r.criterion_ok) {
            code = EXIT_CRITERION;
        }
        let file = inclusion_trace_file(&setup, &mut trace, &a.opts)?;
        if let Some(p) = target {
            emit(&file, Some(p))?;
        }
        residuals.push(trace.residuals());
    }
    let (h, c) = (&residuals[0], &residuals[1]);
    let paired: Vec<(usize, f64, f64)> = h
        .iter()
        .zip(c)
        .enumerate()
        .filter_map(|(k, (x, y))| Some((k, (*x)?, (*y)?)))
        .collect();
    let crossover = paired
        .iter()
        .rposition(|(_, x, y)| !(x < y))
        .map_or(paired.first().map(|p| p.0), |i| paired.get(i + 1).map(|p| p.0));
    match crossover {
        Some(k) => println!("halpern residual below classical for all k >= {k}"),
        None => println!("halpern residual not below classical at the last compared iteration"),
    }
    if let Some((k, x, y)) = paired.last() {
        println!("k={k}: halpern {x:.6e}, classical {y:.6e}");
    }
    Ok(code)
}
