use thiserror::Error;

pub type Result<T> = std::result::Result<T, HippmError>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HippmError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("operator is not monotone: {0}")]
    NotMonotone(String),

    #[error("exact resolvent unavailable for this operator (tolerance must be positive)")]
    ExactResolventUnavailable,

    #[error("singular linear system in resolvent evaluation")]
    SingularSystem,

    #[error("inner solver did not reach its target after {iterations} iterations (certificate {certificate:e}, target {target:e})")]
    InnerSolverStalled {
        iterations: usize,
        certificate: f64,
        target: f64,
    },

    #[error("criterion B unattainable at iteration {k}: tolerance refinement exhausted")]
    CriterionBUnattainable { k: usize },

    #[error("certificate unavailable (objective not strongly convex), use oracle mode")]
    CertificateUnavailable,

    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),

    #[error("converged before window: nonpositive residual at k = {k}")]
    ConvergedBeforeWindow { k: usize },

    #[error("missing data: {0}")]
    MissingData(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for HippmError {
    fn from(e: std::io::Error) -> Self {
        HippmError::Io(e.to_string())
    }
}

impl HippmError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        HippmError::InvalidArgument(msg.into())
    }
}
