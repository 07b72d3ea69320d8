use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("covariance matrix is not positive definite (pivot {pivot:e}, threshold {threshold:e})")]
    SingularCovariance { pivot: f64, threshold: f64 },
    #[error("constraint set is not a convex cone")]
    NonConicSet,
    #[error("active-set solver did not converge within {iterations} iterations")]
    SolverNonconvergence { iterations: usize },
    #[error("recovered portfolio lies outside the constraint set (residual {residual:e})")]
    MembershipViolation { residual: f64 },
    #[error("time {t} outside [0, {horizon}]")]
    TimeOutOfRange { t: f64, horizon: f64 },
    #[error("density value must be positive, got {0}")]
    NonpositiveDensity(f64),
    #[error("exponent {exponent} exceeds the overflow guard")]
    ParameterOverflow { exponent: f64 },
    #[error("strategy left the constraint set at t = {t} (residual {residual:e})")]
    ConstraintViolation { t: f64, residual: f64 },
    #[error("{scheme} scheme requires an optimal feedback strategy")]
    UnsupportedScheme { scheme: &'static str },
    #[error("at least 2 paths are required, got {0}")]
    InsufficientPaths(usize),
    #[error("saddle condition violated: {0}")]
    SaddleViolation(String),
    #[error("equivalence violated: {0}")]
    EquivalenceViolation(String),
    #[error("verification suite '{suite}' failed: {detail}")]
    VerificationFailed { suite: String, detail: String },
}

impl Error {
    /// Stable variant name, printed by the CLI on domain errors.
    pub fn name(&self) -> &'static str {
        match self {
            Error::DimensionMismatch(_) => "DimensionMismatch",
            Error::InvalidParameter(_) => "InvalidParameter",
            Error::SingularCovariance { .. } => "SingularCovariance",
            Error::NonConicSet => "NonConicSet",
            Error::SolverNonconvergence { .. } => "SolverNonconvergence",
            Error::MembershipViolation { .. } => "MembershipViolation",
            Error::TimeOutOfRange { .. } => "TimeOutOfRange",
            Error::NonpositiveDensity(_) => "NonpositiveDensity",
            Error::ParameterOverflow { .. } => "ParameterOverflow",
            Error::ConstraintViolation { .. } => "ConstraintViolation",
            Error::UnsupportedScheme { .. } => "UnsupportedScheme",
            Error::InsufficientPaths(_) => "InsufficientPaths",
            Error::SaddleViolation(_) => "SaddleViolation",
            Error::EquivalenceViolation(_) => "EquivalenceViolation",
            Error::VerificationFailed { .. } => "VerificationFailed",
        }
    }
}
