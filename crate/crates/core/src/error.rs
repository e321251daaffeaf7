use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("the evolving model has no states yet")]
    EmptyModel,

    #[error("action bin {bin} is outside 1..={bins}")]
    ActionOutOfRange { bin: usize, bins: usize },

    #[error("prediction horizon must be at least 2, got {0}")]
    HorizonTooShort(usize),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid lead profile: {0}")]
    InvalidProfile(String),

    #[error("cannot summarize an empty record set")]
    EmptyRecords,

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
