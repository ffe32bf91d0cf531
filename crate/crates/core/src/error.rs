use thiserror::Error;

/// Errors raised by the laboratory.
///
/// The variants track who is at fault: `InvalidInput` and `Contract` are caller
/// mistakes, `OutsideDomain` and `Runtime` surface while evaluating mappings or
/// running an engine, `Internal` signals a broken invariant in this crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("point {point:?} lies outside the domain of `{label}`")]
    OutsideDomain { label: String, point: Vec<f64> },

    #[error("mapping `{label}` produced a non-finite value at {point:?}")]
    NonFinite { label: String, point: Vec<f64> },

    #[error("step {step}: {message}")]
    Runtime { step: usize, message: String },

    #[error("internal invariant violated: {0}")]
    Internal(String),

    #[error("config: {0}")]
    Config(String),

    #[error("io: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
