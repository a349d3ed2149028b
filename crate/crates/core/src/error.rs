use thiserror::Error;

#[derive(Debug, Error)]
pub enum FracError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("quadrature failure: {0}")]
    Quadrature(String),
    #[error("numerical failure: {0}")]
    Numeric(String),
    #[error("incompatible fields: {0}")]
    Incompatible(String),
    #[error("cache format: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl FracError {
    /// Process exit code for the failure class.
    pub fn exit_code(&self) -> i32 {
        match self {
            FracError::InvalidParams(_) | FracError::Unsupported(_) => 2,
            FracError::Io(_) | FracError::Format(_) => 4,
            _ => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, FracError>;
