//! Crate-wide error type.
//!
//! All fallible operations return [`Result`]. Domain violations are reported
//! eagerly with enough context to identify the offending input; numerical
//! tolerances are never silently widened to turn an error into a value.

/// Errors produced by pay-off construction, pricing, simulation and
/// verification routines.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A vector or matrix had the wrong dimension.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// Component labels of two objects that must share an underlying do not agree.
    #[error("label mismatch: {0}")]
    LabelMismatch(String),

    /// A parameter is outside its admissible domain.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A log increment was requested on a component whose price level is not
    /// strictly positive.
    #[error("non-positive price level for component {label}: {value}")]
    NonPositiveLevel { label: String, value: f64 },

    /// A monitoring partition violated its invariants.
    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    /// An option chain violated its invariants.
    #[error("invalid option chain: {0}")]
    InvalidChain(String),

    /// A market state violated its invariants or misses a required entry.
    #[error("invalid market state: {0}")]
    InvalidState(String),

    /// The requested quantity has no implementation for the given inputs
    /// (for example an exotic cross moment under the Heston model).
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// A pay-off specification (JSON or shorthand) could not be interpreted.
    #[error("malformed payoff spec: {0}")]
    PayoffSpec(String),

    /// Underlying I/O failure.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// CSV parse failure.
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Shorthand for an [`Error::InvalidParameter`] with a formatted message.
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
