use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParam { field: &'static str, reason: String },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("input too short: {0}")]
    TooShort(String),

    #[error("index out of range: {0}")]
    OutOfRange(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("prefix strategy `{0}` is already registered")]
    DuplicateStrategy(String),

    #[error("unknown prefix strategy `{0}`")]
    UnknownStrategy(String),

    #[error("conditioning infeasible for {lemma}: acceptance rate {rate:.2e} below floor {floor:.0e}")]
    ConditioningInfeasible { lemma: &'static str, rate: f64, floor: f64 },

    #[error("provenance records are required in simulation mode")]
    ProvenanceMissing,

    #[error("code has no codewords")]
    EmptyCode,
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParam { field, reason: reason.into() }
}
