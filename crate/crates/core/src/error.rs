use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid parameter `{field}`: {message}")]
    InvalidParameter { field: String, message: String },

    #[error("unknown symbol `{0}`")]
    UnknownSymbol(String),

    #[error("symbol `{label}` is not finite at {at}")]
    NonFinite { label: String, at: String },

    #[error("division by zero in symbol ratio at {0}")]
    DivisionByZero(String),

    #[error("symbol `{label}` cannot be evaluated off its sample lattice at {at}")]
    OffLattice { label: String, at: String },

    #[error("operator is not Hermitian (max asymmetry {0:e})")]
    NotHermitian(f64),

    #[error("singular system (condition estimate {condition:e})")]
    Singular { condition: f64 },

    #[error("quadrature did not converge: relative change {change:e} > tolerance {tol:e} ({context})")]
    NonConverged { change: f64, tol: f64, context: String },

    #[error("singular integrand used without symmetrization: {0}")]
    SingularForm(String),

    #[error("negative value {value:e} where a nonnegative quantity was expected ({context})")]
    Negative { value: f64, context: String },

    #[error("ladder exhausted: {0}")]
    LadderExhausted(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(field: &str, message: impl Into<String>) -> Error {
    Error::InvalidParameter {
        field: field.to_string(),
        message: message.into(),
    }
}
