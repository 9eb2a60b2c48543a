use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] voxtherm_core::Error),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{}: {msg}", path.display())]
    Format { path: PathBuf, msg: String },
    #[error("config: {0}")]
    Config(String),
    #[error("{0}")]
    Usage(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            msg: msg.into(),
        }
    }

    /// 2 config/usage, 3 numerical, 4 I/O.
    pub fn exit_code(&self) -> u8 {
        use voxtherm_core::Error as E;
        fn core(e: &E) -> u8 {
            match e {
                E::NumericalFailure { .. }
                | E::SingularMatrix { .. }
                | E::NonFiniteTarget { .. }
                | E::UndefinedMetric(_) => 3,
                E::Stage { source, .. } => core(source),
                _ => 2,
            }
        }
        match self {
            Error::Core(e) => core(e),
            Error::Io { .. } | Error::Format { .. } => 4,
            Error::Config(_) | Error::Usage(_) => 2,
        }
    }
}
