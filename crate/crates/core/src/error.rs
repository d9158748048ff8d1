use std::path::PathBuf;

use thiserror::Error;

use crate::geo::GeoError;
use crate::ingest::IngestError;
use crate::perception::PerceptionError;
use crate::stats::StatsError;
use crate::taxonomy::GraphError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Pipeline-level error. Each variant maps onto one process exit code.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Geo(#[from] GeoError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Perception(#[from] PerceptionError),
    #[error("{0}")]
    Input(String),
    #[error("missing artifact {path}: run `chattymaps {stage}` first")]
    MissingArtifact { stage: &'static str, path: PathBuf },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invariant violated: {0}")]
    Invariant(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// 0 success, 1 input error, 2 missing upstream artifact, 3 internal invariant violation.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::MissingArtifact { .. } => 2,
            Error::Invariant(_) => 3,
            _ => 1,
        }
    }
}
