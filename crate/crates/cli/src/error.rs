use swr_core::SwrError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) => 1,
            Self::Data(_) => 2,
            Self::Numerical(_) => 3,
        }
    }

    pub fn io(path: &std::path::Path, err: impl std::fmt::Display) -> Self {
        Self::Data(format!("{}: {err}", path.display()))
    }
}

impl From<SwrError> for CliError {
    fn from(err: SwrError) -> Self {
        let msg = err.to_string();
        match err {
            SwrError::InvalidParameter(_) => Self::Usage(msg),
            SwrError::NonFinite(_)
            | SwrError::SeriesTooShort { .. }
            | SwrError::LengthMismatch { .. }
            | SwrError::Csv(_)
            | SwrError::Io(_) => Self::Data(msg),
            SwrError::Degenerate(_)
            | SwrError::NonStationary { .. }
            | SwrError::Optimizer(_)
            | SwrError::Training { .. } => Self::Numerical(msg),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
