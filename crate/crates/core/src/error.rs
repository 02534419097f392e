use thiserror::Error;

/// Numerical and domain failures raised by the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("capacity error: {0}")]
    Capacity(String),
    #[error("unreachable target: excitation {target} exceeds lineshape peak {peak}")]
    UnreachableTarget { target: f64, peak: f64 },
    #[error("bracket error: {0}")]
    Bracket(String),
    #[error("singular configuration: {0}")]
    SingularConfiguration(String),
    #[error("slope degenerate: {0}")]
    SlopeDegenerate(String),
    #[error("rescale undefined: {0}")]
    RescaleUndefined(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("sign inconsistency: {0}")]
    SignInconsistency(String),
    #[error("convergence failure: {0}")]
    Convergence(String),
}

impl Error {
    /// Stable identifier used in CLI diagnostics.
    pub fn name(&self) -> &'static str {
        match self {
            Error::Domain(_) => "DomainError",
            Error::Capacity(_) => "CapacityError",
            Error::UnreachableTarget { .. } => "UnreachableTargetError",
            Error::Bracket(_) => "BracketError",
            Error::SingularConfiguration(_) => "SingularConfigurationError",
            Error::SlopeDegenerate(_) => "SlopeDegenerateError",
            Error::RescaleUndefined(_) => "RescaleUndefinedError",
            Error::InsufficientData(_) => "InsufficientDataError",
            Error::SignInconsistency(_) => "SignInconsistencyError",
            Error::Convergence(_) => "ConvergenceError",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn ensure_finite(label: &str, value: f64) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(domain(format!("{label} must be finite, got {value}")))
    }
}

pub(crate) fn ensure_positive(label: &str, value: f64) -> Result<f64> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(domain(format!("{label} must be positive and finite, got {value}")))
    }
}
