use thiserror::Error;

use crate::classifiers::ModelError;
use crate::features::DatasetError;
use crate::ingest::IngestError;
use crate::select::SelectError;
use crate::sim::SimError;

/// Broad failure category, used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Malformed input data (pcap, CSV, model file, config file).
    Parse,
    /// A caller violated an operation's preconditions.
    Contract,
    /// Filesystem or stream failure.
    Io,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Select(#[from] SelectError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    InFile {
        path: String,
        #[source]
        source: Box<Error>,
    },
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    /// Attaches the file being processed to an error.
    pub fn in_file(path: impl Into<String>, source: impl Into<Error>) -> Self {
        Error::InFile {
            path: path.into(),
            source: Box::new(source.into()),
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InFile { source, .. } => source.kind(),
            Error::Io { .. } => ErrorKind::Io,
            Error::Config(_) => ErrorKind::Parse,
            Error::Ingest(e) => e.kind(),
            Error::Dataset(e) => e.kind(),
            Error::Model(e) => e.kind(),
            Error::Select(e) => e.kind(),
            Error::Sim(_) => ErrorKind::Contract,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
