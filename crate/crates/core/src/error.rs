use thiserror::Error;

/// Errors produced by column validation, index construction and lookups.
#[derive(Debug, Error)]
pub enum Error {
    /// A column violated one of its structural invariants. `position` is the
    /// first offending index into the relevant array (keys, tuples or counts).
    #[error("invalid column at position {position}: {reason}")]
    InvalidColumn { position: usize, reason: String },

    /// A parameter was outside its documented range.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// Lookup of a key that is not part of the public key domain aborts.
    #[error("key {0} not found in the index domain")]
    KeyNotFound(i64),

    /// An operation that requires data received an empty input.
    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    /// A benchmark configuration field failed validation.
    #[error("invalid config field `{field}`: {reason}")]
    InvalidConfig { field: String, reason: String },

    /// Bound checking refuses to produce verdicts from undersized cells.
    #[error(
        "insufficient trials for cell {cell}: {got} < {min}; \
         increase `seeds` or `keys_per_seed` so every cell has at least {min} records"
    )]
    InsufficientTrials {
        cell: String,
        got: usize,
        min: usize,
    },

    /// A report or index file did not match its expected schema.
    #[error("malformed {what}: {reason}")]
    MalformedFile { what: &'static str, reason: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid_parameter(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn invalid_column(position: usize, reason: impl Into<String>) -> Self {
        Error::InvalidColumn {
            position,
            reason: reason.into(),
        }
    }
}
