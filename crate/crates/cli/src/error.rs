use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),

    #[error("{0}")]
    Compute(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("[{stage}] {source}")]
    Stage {
        stage: &'static str,
        source: Box<CliError>,
    },
}

impl CliError {
    /// 1 validation, 2 computation, 3 I/O.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Compute(_) => 2,
            CliError::Io { .. } => 3,
            CliError::Stage { source, .. } => source.exit_code(),
        }
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn validation(msg: impl Into<String>) -> Self {
        CliError::Validation(msg.into())
    }
}

impl From<beamflat::Error> for CliError {
    fn from(e: beamflat::Error) -> Self {
        use beamflat::Error as E;
        match e {
            E::LengthMismatch { .. }
            | E::IndexOutOfRange { .. }
            | E::InvalidParameter { .. }
            | E::Parse(_) => CliError::Validation(e.to_string()),
            E::Domain(_) | E::JetMismatch(_) | E::Solve(_) => CliError::Compute(e.to_string()),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Tags an error with the pipeline stage it came from.
pub trait StageExt<T> {
    fn stage(self, stage: &'static str) -> CliResult<T>;
}

impl<T> StageExt<T> for CliResult<T> {
    fn stage(self, stage: &'static str) -> CliResult<T> {
        self.map_err(|e| CliError::Stage {
            stage,
            source: Box::new(e),
        })
    }
}
