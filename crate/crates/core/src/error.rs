use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum GinarError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("singular system: {0}")]
    Singular(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("invalid series: {0}")]
    InvalidSeries(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl GinarError {
    /// Coarse category used for process exit codes and C status codes.
    pub fn kind(&self) -> ErrorKind {
        match self {
            GinarError::InvalidParameter(_)
            | GinarError::InvalidModel(_)
            | GinarError::LengthMismatch { .. } => ErrorKind::Usage,
            GinarError::Unsupported(_) => ErrorKind::Unsupported,
            GinarError::InvalidSeries(_) | GinarError::Parse(_) | GinarError::Io(_) => {
                ErrorKind::Data
            }
            GinarError::Singular(_) | GinarError::Domain(_) | GinarError::Numerical(_) => {
                ErrorKind::Numerical
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Usage,
    Unsupported,
    Data,
    Numerical,
}

pub type Result<T> = std::result::Result<T, GinarError>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(GinarError::InvalidParameter(msg.into()))
}
