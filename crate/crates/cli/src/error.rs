use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Core(#[from] noisestab::Error),
}

pub(crate) fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

impl CliError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.to_path_buf(), source }
    }

    /// 2 for bad input of any kind, 1 for numeric failures.
    pub fn exit_code(&self) -> u8 {
        use noisestab::Error as E;
        match self {
            CliError::Usage(_) | CliError::Io { .. } => 2,
            CliError::Core(e) => match e {
                E::InvalidParameter(_) | E::Domain(_) | E::SizeLimit(_) | E::ModelMismatch(_) | E::Parse { .. } => 2,
                E::DegenerateModel(_) | E::UndefinedRatio(_) | E::Numeric(_) => 1,
            },
        }
    }
}
