use alloc::boxed::Box;
use alloc::string::String;

use crate::bayes::diagnostics::DiagnosticsReport;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("degenerate duration for epic {0}: planned and actual durations must be positive")]
    DegenerateDuration(String),

    #[error("dataset is empty after cleaning")]
    EmptyDataset,

    #[error("referential integrity violation: {0}")]
    ReferentialIntegrity(String),

    #[error("missing snapshot for epic {epic_id} at milestone {milestone}")]
    DataGap { epic_id: String, milestone: u8 },

    #[error("shape mismatch: expected {expected}, got {actual}")]
    Shape { expected: usize, actual: usize },

    #[error("covariate schema mismatch: {0}")]
    Schema(String),

    #[error("elbow selection needs at least 3 k values, got {0}")]
    InsufficientCurve(usize),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("diagnostics need at least 2 chains, got {0}")]
    InsufficientChains(usize),

    #[error("SA is undefined when the random-guess MAE is zero")]
    UndefinedSa,

    #[error("numeric domain error: {0}")]
    NumericDomain(String),

    #[error("sampler failure: {message}")]
    SamplerFailure {
        message: String,
        diagnostics: Option<Box<DiagnosticsReport>>,
    },

    #[error("{context}: {source}")]
    Context { context: String, source: Box<Error> },
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// Wraps the error with a location such as `split 3, mode dynamic`.
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// The innermost error, with all context layers removed.
    pub fn root(&self) -> &Error {
        match self {
            Error::Context { source, .. } => source.root(),
            other => other,
        }
    }
}
