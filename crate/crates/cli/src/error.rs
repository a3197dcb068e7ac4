use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] spinbath_core::Error),

    #[error("config: {0}")]
    Config(String),

    /// Malformed input file.
    #[error("{0}")]
    Input(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    /// 3 for numerical failures, 2 for everything the user can fix.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(spinbath_core::Error::NonConvergence { .. } | spinbath_core::Error::FlatSignal) => 3,
            _ => 2,
        }
    }

    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        CliError::Io { path: path.as_ref().display().to_string(), source }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
