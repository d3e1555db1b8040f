use thiserror::Error;

/// Broad failure category, used by the CLI to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Validation,
    Numerical,
    Verification,
}

#[derive(Debug, Error)]
pub enum GmiError {
    #[error("invalid increment specification: {0}")]
    InvalidSpec(String),

    #[error("degenerate operator: all differencing orders are zero")]
    DegenerateOperator,

    #[error("integer overflow while expanding coefficients at index {index}")]
    Overflow { index: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("increment spec is not stationary: {0}")]
    NonStationary(String),

    #[error("density is not admissible: {0}")]
    InvalidDensity(String),

    #[error("minimality violated (singular density) at node {node} (lambda = {lambda})")]
    SingularDensity { node: usize, lambda: f64 },

    #[error("non-finite integrand at node {node} (lambda = {lambda})")]
    NonFinite { node: usize, lambda: f64 },

    #[error("linear system is singular")]
    SingularSystem,

    #[error("inconsistent results: {0}")]
    Inconsistent(String),

    #[error("density class is infeasible: {0}")]
    Infeasible(String),

    #[error("verification failed: {0}")]
    Verification(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl GmiError {
    pub fn kind(&self) -> ErrorKind {
        match self {
            GmiError::InvalidSpec(_)
            | GmiError::DegenerateOperator
            | GmiError::InvalidInput(_)
            | GmiError::DimensionMismatch { .. }
            | GmiError::NonStationary(_)
            | GmiError::InvalidDensity(_)
            | GmiError::Infeasible(_)
            | GmiError::Io(_)
            | GmiError::Csv(_)
            | GmiError::Json(_) => ErrorKind::Validation,
            GmiError::Overflow { .. }
            | GmiError::SingularDensity { .. }
            | GmiError::NonFinite { .. }
            | GmiError::SingularSystem
            | GmiError::Inconsistent(_) => ErrorKind::Numerical,
            GmiError::Verification(_) => ErrorKind::Verification,
        }
    }

    /// Short machine-readable code for error envelopes.
    pub fn code(&self) -> &'static str {
        match self {
            GmiError::InvalidSpec(_) => "invalid_spec",
            GmiError::DegenerateOperator => "degenerate_operator",
            GmiError::Overflow { .. } => "overflow",
            GmiError::InvalidInput(_) => "invalid_input",
            GmiError::DimensionMismatch { .. } => "dimension_mismatch",
            GmiError::NonStationary(_) => "non_stationary",
            GmiError::InvalidDensity(_) => "invalid_density",
            GmiError::SingularDensity { .. } => "singular_density",
            GmiError::NonFinite { .. } => "non_finite",
            GmiError::SingularSystem => "singular_system",
            GmiError::Inconsistent(_) => "inconsistent",
            GmiError::Infeasible(_) => "infeasible",
            GmiError::Verification(_) => "verification_failed",
            GmiError::Io(_) => "io",
            GmiError::Csv(_) => "csv",
            GmiError::Json(_) => "json",
        }
    }
}

pub type Result<T> = std::result::Result<T, GmiError>;
