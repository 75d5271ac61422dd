use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    /// A dense oracle or enumeration was asked for more states than it allows.
    #[error("size bound exceeded: {what} needs {needed}, limit is {limit}")]
    TooLarge {
        what: &'static str,
        needed: u128,
        limit: u128,
    },

    #[error("invalid corpus: {0}")]
    Corpus(String),

    /// A tempered Dirichlet parameter came out non-positive.
    #[error("non-positive Dirichlet parameter {value} for {which}; use a larger prior")]
    NonPositiveParameter { which: &'static str, value: f64 },

    #[error("invalid state: {0}")]
    State(String),
}

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
