//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite complex value")]
    NonFiniteComplex,

    #[error("degenerate weight vector")]
    DegenerateWeights,

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("shape mismatch at {context}: {detail}")]
    ShapeMismatch { context: String, detail: String },

    #[error("cost guard violated: {0}")]
    CostGuard(String),

    #[error("not a CVDS file")]
    NotCvds,

    #[error("truncated dataset")]
    Truncated,

    #[error("unsupported CVDS version {0}")]
    UnsupportedVersion(u32),

    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: u32, classes: u32 },

    #[error("non-finite value produced at layer {layer}")]
    NonFiniteAtLayer { layer: String },

    #[error("backward called before forward")]
    BackwardBeforeForward,

    #[error("invalid argument: {0}")]
    Invalid(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn shape(context: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::ShapeMismatch {
            context: context.into(),
            detail: detail.into(),
        }
    }
}
