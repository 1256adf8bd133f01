use thiserror::Error;

/// Errors produced by the extraction pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("malformed record at line {line}: {message}")]
    MalformedRecord { line: usize, message: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("span [{start}, {end}] out of range for sequence length {len}")]
    SpanOutOfRange { start: usize, end: usize, len: usize },

    #[error("token id {id} out of vocabulary range {vocab_size}")]
    TokenOutOfRange { id: u32, vocab_size: usize },

    #[error("sequence length {len} exceeds the positional table size {max}")]
    SequenceTooLong { len: usize, max: usize },

    #[error("capability unavailable: {0}")]
    Unavailable(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error(
        "sentence id mismatch: {} gold ids without predictions {:?}, {} predicted ids without gold {:?}",
        missing_predictions.len(), missing_predictions, unknown_predictions.len(), unknown_predictions
    )]
    OrphanIds {
        missing_predictions: Vec<String>,
        unknown_predictions: Vec<String>,
    },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable short name of the variant, for machine-readable reporting.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::EmptyInput(_) => "empty-input",
            Error::MalformedRecord { .. } => "malformed-record",
            Error::Config(_) => "config",
            Error::Shape(_) => "shape",
            Error::SpanOutOfRange { .. } => "span-out-of-range",
            Error::TokenOutOfRange { .. } => "token-out-of-range",
            Error::SequenceTooLong { .. } => "sequence-too-long",
            Error::Unavailable(_) => "unavailable",
            Error::NonFinite(_) => "non-finite",
            Error::OrphanIds { .. } => "orphan-ids",
            Error::Checkpoint(_) => "checkpoint",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
