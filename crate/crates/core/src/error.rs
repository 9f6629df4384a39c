use thiserror::Error;

/// Errors raised by the laboratory.
///
/// The CLI maps [`LabError::Capacity`] to exit code 3 and everything else to 2.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum LabError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid design: {0}")]
    InvalidDesign(String),
    #[error("capacity exceeded: {0}")]
    Capacity(String),
    #[error("unsupported design: {0}")]
    UnsupportedDesign(String),
    #[error("unsupported estimand: {0}")]
    UnsupportedEstimand(String),
    #[error("incomplete outcome table: {0}")]
    IncompleteTable(String),
    #[error("incomplete estimator: {0}")]
    IncompleteEstimator(String),
    #[error("numerically ambiguous: {0}")]
    NumericallyAmbiguous(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("io error: {0}")]
    Io(String),
}

impl LabError {
    pub fn is_capacity(&self) -> bool {
        matches!(self, LabError::Capacity(_))
    }
}

impl From<std::io::Error> for LabError {
    fn from(e: std::io::Error) -> Self {
        LabError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for LabError {
    fn from(e: serde_json::Error) -> Self {
        LabError::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, LabError>;
