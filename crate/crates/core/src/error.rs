use thiserror::Error;

/// Errors raised by the library. The variant decides the CLI exit code:
/// validation problems map to 1, numerical failures to 2.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum HenonError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("singular locus reached at w={w}, dw={dw}")]
    SingularLocus { w: f64, dw: f64 },

    #[error("io error: {0}")]
    Io(String),
}

impl HenonError {
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            HenonError::InvalidParams(_)
                | HenonError::InvalidArgument(_)
                | HenonError::InsufficientData(_)
                | HenonError::Io(_)
        )
    }
}

impl From<std::io::Error> for HenonError {
    fn from(e: std::io::Error) -> Self {
        HenonError::Io(e.to_string())
    }
}

impl From<csv::Error> for HenonError {
    fn from(e: csv::Error) -> Self {
        HenonError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for HenonError {
    fn from(e: serde_json::Error) -> Self {
        HenonError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, HenonError>;
