use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Invalid configuration or flags; `key` names the offending setting.
    #[error("config error at {key}: {message}")]
    Config { key: String, message: String },
    #[error(transparent)]
    Core(#[from] qcarpet::Error),
    #[error("I/O error at {}: {message}", path.display())]
    Io { path: PathBuf, message: String },
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Config { key: key.into(), message: message.into() }
    }

    /// Attributes a library error raised while applying the setting `key`.
    /// Numerical and I/O failures keep their own category.
    pub fn at(key: &'static str) -> impl FnOnce(qcarpet::Error) -> CliError {
        move |err| {
            if err.is_numerical() || matches!(err, qcarpet::Error::Io { .. }) {
                CliError::Core(err)
            } else {
                CliError::config(key, err.to_string())
            }
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } => 2,
            CliError::Core(e) if e.is_numerical() => 3,
            CliError::Core(qcarpet::Error::Io { .. }) | CliError::Io { .. } => 1,
            CliError::Core(_) => 2,
        }
    }
}
