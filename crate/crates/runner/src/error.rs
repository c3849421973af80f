use thiserror::Error;

#[derive(Debug, Error)]
pub enum RunnerError {
    #[error("cannot read {path}: {message}")]
    Read { path: String, message: String },

    #[error("parse error at {path}: {message}")]
    Parse { path: String, message: String },

    #[error("invalid config: {path}: {message}")]
    Validation { path: String, message: String },

    #[error(transparent)]
    Core(#[from] mfg_core::Error),

    #[error("i/o error: {0}")]
    Io(String),
}

impl RunnerError {
    pub(crate) fn invalid(path: impl Into<String>, message: impl ToString) -> Self {
        RunnerError::Validation {
            path: path.into(),
            message: message.to_string(),
        }
    }

    /// Process exit status: 2 for a rank failure, 3 for divergence, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        use mfg_core::Error as E;
        match self {
            RunnerError::Core(e) => match e.root() {
                E::RankDeficient { .. } => 2,
                E::Divergence { .. }
                | E::NoConvergence { .. }
                | E::NotStabilizing { .. }
                | E::NonFiniteState { .. } => 3,
                _ => 1,
            },
            _ => 1,
        }
    }
}

impl From<std::io::Error> for RunnerError {
    fn from(e: std::io::Error) -> Self {
        RunnerError::Io(e.to_string())
    }
}

impl From<csv::Error> for RunnerError {
    fn from(e: csv::Error) -> Self {
        RunnerError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for RunnerError {
    fn from(e: serde_json::Error) -> Self {
        RunnerError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, RunnerError>;
