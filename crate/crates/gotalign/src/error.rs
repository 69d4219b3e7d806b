use std::io;
use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] gotalign_core::Error),
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {reason}")]
    Format { path: PathBuf, reason: String },
    /// A failure inside one setting of an ablation sweep.
    #[error("setting {setting}: {source}")]
    Setting {
        setting: String,
        source: gotalign_core::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: &Path, source: io::Error) -> Self {
        Error::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn format(path: &Path, reason: impl Into<String>) -> Self {
        Error::Format {
            path: path.to_path_buf(),
            reason: reason.into(),
        }
    }

    /// Process exit status: 2 for numeric failures, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        use gotalign_core::Error as E;
        let core = match self {
            Error::Core(e) | Error::Setting { source: e, .. } => e,
            _ => return 1,
        };
        match core {
            E::NumericAbort { .. } | E::NonFinite { .. } | E::NonFiniteGradient { .. } => 2,
            _ => 1,
        }
    }
}
