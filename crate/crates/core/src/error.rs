use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("mesh defect: {0}")]
    MeshDefect(String),

    #[error("spectral grid mismatch: {0}")]
    GridMismatch(String),

    #[error("CFL violation at t={time}: dt={dt} exceeds limit {limit}")]
    Cfl { time: f64, dt: f64, limit: f64 },

    #[error("non-finite state at t={time}: {what}")]
    NonFinite { time: f64, what: String },

    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    NotConverged {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("series too short: {0}")]
    SeriesTooShort(String),

    #[error("record stride {stride} is coarser than the required {max}")]
    StrideTooCoarse { stride: f64, max: f64 },

    #[error("config line {line}: {message}")]
    ConfigSyntax { line: usize, message: String },

    #[error("unknown config key `{key}` (line {line})")]
    UnknownKey { key: String, line: usize },

    #[error("duplicate config key `{key}` (line {line})")]
    DuplicateKey { key: String, line: usize },

    #[error("config key `{key}`: cannot parse `{value}` as {expected}")]
    ConfigValue {
        key: String,
        value: String,
        expected: &'static str,
    },

    #[error("unknown pipeline `{0}`")]
    UnknownPipeline(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
