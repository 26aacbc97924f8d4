use std::path::{Path, PathBuf};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] seanet_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Wav {
        path: PathBuf,
        #[source]
        source: hound::Error,
    },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("missing modality: {0}")]
    MissingModality(String),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error("empty dataset: {0}")]
    EmptyDataset(String),
}

impl Error {
    /// Machine-readable category printed by the command line on failure.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Core(e) => e.category(),
            Error::Io { .. } => "io",
            Error::Wav { .. } => "wav",
            Error::Format { .. } => "format",
            Error::Config(_) => "config",
            Error::MissingModality(_) => "missing-modality",
            Error::Checkpoint(_) => "checkpoint",
            Error::EmptyDataset(_) => "empty-dataset",
        }
    }

    pub(crate) fn io(path: impl AsRef<Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().to_path_buf(),
            source,
        }
    }

    pub(crate) fn format(path: impl AsRef<Path>, message: impl ToString) -> Self {
        Error::Format {
            path: path.as_ref().to_path_buf(),
            message: message.to_string(),
        }
    }
}
