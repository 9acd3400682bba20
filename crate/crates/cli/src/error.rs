use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad configuration: unknown key, unparsable value, missing input.
    #[error("{0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(#[from] llso_core::Error),
}

impl CliError {
    /// 2 for configuration and input-data problems, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        use llso_core::Error as E;
        match self {
            CliError::Config(_) => 2,
            CliError::Io { .. } => 1,
            CliError::Core(e) => match e {
                E::Data { .. }
                | E::InvalidConfig(_)
                | E::InvalidSpec(_)
                | E::InsufficientData(_)
                | E::Dimension { .. } => 2,
                _ => 1,
            },
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
