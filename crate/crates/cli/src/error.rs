use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid arguments: {0}")]
    Usage(String),
    #[error(transparent)]
    Library(#[from] photon_bell_core::Error),
    #[error("numerical consistency failure: {0}")]
    Consistency(String),
    #[error("cannot write {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("serialization failed: {0}")]
    Json(#[from] serde_json::Error),
    #[error("thread pool: {0}")]
    ThreadPool(#[from] rayon::ThreadPoolBuildError),
}

impl CliError {
    /// Process exit code: 2 for bad arguments, 3 for failed numerical
    /// self-checks, 1 for everything else.
    pub fn exit_code(&self) -> u8 {
        use photon_bell_core::Error as E;
        match self {
            CliError::Usage(_) | CliError::Library(E::InvalidArgument(_) | E::SizeLimit { .. }) => 2,
            CliError::Consistency(_) | CliError::Library(E::Consistency(_)) => 3,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
