use std::path::{Path, PathBuf};

use hdivflow::error::{CheckpointError, DiagnosticsError, Error};
use thiserror::Error;

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_SOLVER: i32 = 4;
pub const EXIT_CHECK_FAILED: i32 = 5;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] Error),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Usage(String),
    #[error("check failed: {0}")]
    CheckFailed(String),
}

impl CliError {
    pub fn io(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
        move |source| CliError::Io { path: path.to_path_buf(), source }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_CONFIG,
            CliError::Io { .. } => EXIT_IO,
            CliError::CheckFailed(_) => EXIT_CHECK_FAILED,
            CliError::Core(e) => match e {
                Error::Config(_) | Error::Mesh(_) | Error::Element(_) | Error::Space(_) => EXIT_CONFIG,
                Error::Diagnostics(DiagnosticsError::NotPeriodic) => EXIT_CONFIG,
                Error::Io { .. } | Error::Checkpoint(_) => EXIT_IO,
                Error::Solver(_) | Error::Assembly(_) | Error::Diagnostics(_) => EXIT_SOLVER,
            },
        }
    }
}

impl From<CheckpointError> for CliError {
    fn from(e: CheckpointError) -> Self {
        CliError::Core(e.into())
    }
}
