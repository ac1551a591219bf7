use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{value} is not a quadratic residue modulo {p}")]
    NotQuadraticResidue { value: u64, p: u64 },

    #[error("no exponent maps the base {base} to {target} modulo {p}")]
    NotInSubgroup { base: u64, target: u64, p: u64 },

    #[error("expected a bitstring of length {expected}, got {got}")]
    LengthMismatch { expected: u32, got: u32 },

    #[error("no safe prime of {bit_len} bits found after {attempts} attempts")]
    Exhausted { bit_len: u32, attempts: u64 },

    #[error("query budget of {cap} exceeded")]
    BudgetExceeded { cap: u64 },

    #[error("samples carry differing public parameters")]
    MixedParams,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
