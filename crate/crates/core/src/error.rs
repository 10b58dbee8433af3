use thiserror::Error;

/// Failure categories. Each maps onto one CLI exit code.
#[derive(Debug, Error)]
pub enum EquivError {
    #[error("invalid input: {0}")]
    Input(String),
    #[error("resource budget exceeded: {0}")]
    Resource(String),
    #[error("outside the domain of the formula: {0}")]
    Domain(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl EquivError {
    /// 2 for anything wrong with the request, 3 for budget overruns.
    /// Exit code 1 is reserved for a completed run whose comparison failed.
    pub fn exit_code(&self) -> i32 {
        match self {
            EquivError::Resource(_) => 3,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, EquivError>;

pub(crate) fn input<T>(msg: impl Into<String>) -> Result<T> {
    Err(EquivError::Input(msg.into()))
}

pub(crate) fn resource<T>(msg: impl Into<String>) -> Result<T> {
    Err(EquivError::Resource(msg.into()))
}

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(EquivError::Domain(msg.into()))
}
