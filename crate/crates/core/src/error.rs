//! Crate-wide error type.
//!
//! Everything that can fail does so loudly and with enough context to
//! reproduce the failure; there are no silent fallbacks anywhere in the
//! pipeline.

use thiserror::Error;

/// Errors raised by the retrieval laboratory.
#[derive(Debug, Error)]
pub enum Error {
    /// A field constructor was handed a modulus that is not prime.
    #[error("modulus {0} is not prime")]
    NotPrime(u64),

    /// Two field elements (or an element and a context) belong to
    /// different prime fields.
    #[error("mismatched field contexts: F_{0} vs F_{1}")]
    FieldMismatch(u64, u64),

    /// A value does not lie in `[0, q)` for the field it claims to be in.
    #[error("value {value} out of range for F_{q}")]
    OutOfRange { value: u64, q: u64 },

    /// Scheme parameters failed validation.
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    /// No generator matrix with the required invertibility profile was
    /// found for `(n, k, q)` within the search budget.
    #[error("no suitable (n={n}, k={k}) generator over F_{q} found: {detail}")]
    GeneratorSearch { n: usize, k: usize, q: u64, detail: String },

    /// A matrix that was expected to be invertible is singular.
    #[error("singular system: {0}")]
    Singular(String),

    /// Dimension mismatch between two objects that must agree.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A combination index is outside `[1, v]`.
    #[error("combination index {index} out of range [1, {v}]")]
    CombinationIndex { index: usize, v: usize },

    /// No sign pattern satisfying the off-line reconstruction property
    /// was found within the search budget.
    #[error("no reconstructible sign pattern found for block {block} (desired index {nu})")]
    SignSearch { block: usize, nu: usize },

    /// The decoder was given fewer projections of a symbol group than
    /// the code dimension requires.
    #[error("missing projection: symbol group {0} has fewer than k appearances")]
    MissingProjection(String),

    /// Decoded values contradict each other; some shard or answer is
    /// corrupt.
    #[error("inconsistent decode: {0}")]
    Corrupt(String),

    /// A serialized artifact (shard file, query matrix, transcript)
    /// failed structural validation.
    #[error("malformed {kind}: {detail}")]
    Malformed { kind: &'static str, detail: String },

    /// Underlying I/O failure (socket transport, file import/export).
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// JSON (de)serialization failure.
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Convenient result alias used across the crate.
pub type Result<T> = std::result::Result<T, Error>;
