use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message} (byte offset {offset})")]
    Format { path: PathBuf, offset: usize, message: String },
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Core(#[from] smoothntf_core::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type IoResult<T> = std::result::Result<T, IoError>;

impl IoError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        IoError::Io { path: path.into(), source }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, offset: usize, message: impl Into<String>) -> Self {
        IoError::Format { path: path.into(), offset, message: message.into() }
    }
}
